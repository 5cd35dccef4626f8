"""Analytic barrier surfaces and the ambient fields built from them.

A :class:`Barrier` is a plane or a round sphere in ``R^m`` (``m = 3`` for
axisymmetric surfaces, ``m = 2`` for planar curves) with a chosen unit
normal ``nu_S``.  Sign conventions: ``k(X, Y) = <D_X nu_S, Y>``, so the
unit sphere with outward normal has ``k = I`` on its tangent space.

Off the barrier, ``k`` and ``nu_S`` are extended by nearest-point
projection times a smooth bump supported in a tubular neighbourhood, the
signed distance is smoothly clamped to ``[-1, 1]``, and ``V`` is the radial
unit field of a sphere with a smooth cut-off near the centre and far away.
All evaluators are vectorised over a leading axis of points.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import GeometryError, PreconditionError, UnsupportedBarrierError

__all__ = ["Barrier", "AmbientFields", "bump", "smoothstep"]

ON_SURFACE_TOL = 1e-8


def smoothstep(x):
    """Quintic smoothstep: 0 for x <= 0, 1 for x >= 1, C^2 in between."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


def bump(s):
    """``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero outside; ``bump(0) = 1``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class AmbientFields:
    """Constants attached to a barrier: tube radius, D0, alpha and b."""

    tubular_radius: float
    D0: float
    alpha: float = 0.0
    b_const: float = 1.0

    def __post_init__(self):
        if self.D0 < 1.0:
            raise PreconditionError("D0 must be >= 1")
        if self.b_const < 1.0:
            raise PreconditionError("b_const must be >= 1")
        if self.alpha < 0.0:
            raise PreconditionError("alpha must be >= 0")


class Barrier:
    """A plane ``{<x, n> = offset}`` or a sphere ``{|x - c| = R}``.

    Use :meth:`plane` or :meth:`sphere` to construct.  ``orientation`` is
    ``+1`` if ``nu_S`` equals ``n`` (plane) or the outward radial direction
    (sphere), ``-1`` otherwise.
    """

    def __init__(self, kind, dim, normal=None, offset=0.0, center=None, radius=None,
                 orientation=1):
        if kind not in ("plane", "sphere"):
            raise UnsupportedBarrierError(f"unknown barrier kind {kind!r}")
        if orientation not in (1, -1):
            raise PreconditionError("orientation must be +1 or -1")
        if dim not in (2, 3):
            raise PreconditionError("ambient dimension must be 2 or 3")
        self.kind = kind
        self.dim = dim
        self.orientation = int(orientation)
        if kind == "plane":
            n = np.asarray(normal, dtype=float)
            if n.shape != (dim,) or np.linalg.norm(n) == 0:
                raise PreconditionError("plane normal must be a nonzero vector of length dim")
            self.normal = n / np.linalg.norm(n)
            self.offset = float(offset)
            self.center = None
            self.radius = None
            self.tubular_radius = 1.0
        else:
            c = np.asarray(center, dtype=float)
            if c.shape != (dim,):
                raise PreconditionError("sphere center must have length dim")
            if radius is None or not radius > 0:
                raise PreconditionError("sphere radius must be positive")
            self.center = c
            self.radius = float(radius)
            self.normal = None
            self.offset = None
            self.tubular_radius = min(1.0, 0.5 * self.radius)

    # -- constructors -----------------------------------------------------
    @classmethod
    def plane(cls, normal=(0.0, 0.0, 1.0), offset=0.0, orientation=1):
        normal = np.asarray(normal, dtype=float)
        return cls("plane", normal.size, normal=normal, offset=offset,
                   orientation=orientation)

    @classmethod
    def sphere(cls, center=(0.0, 0.0, 0.0), radius=1.0, orientation=1):
        center = np.asarray(center, dtype=float)
        return cls("sphere", center.size, center=center, radius=radius,
                   orientation=orientation)

    def __repr__(self):
        if self.kind == "plane":
            return (f"Barrier.plane(normal={self.normal.tolist()}, offset={self.offset}, "
                    f"orientation={self.orientation})")
        return (f"Barrier.sphere(center={self.center.tolist()}, radius={self.radius}, "
                f"orientation={self.orientation})")

    def to_dict(self):
        d = {"kind": self.kind, "orientation": self.orientation}
        if self.kind == "plane":
            d.update(normal=self.normal.tolist(), offset=self.offset)
        else:
            d.update(center=self.center.tolist(), radius=self.radius)
        return d

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "plane":
            return cls.plane(d["normal"], d.get("offset", 0.0), d.get("orientation", 1))
        if d["kind"] == "sphere":
            return cls.sphere(d["center"], d["radius"], d.get("orientation", 1))
        raise UnsupportedBarrierError(f"unknown barrier kind {d['kind']!r}")

    def rescaled(self, origin, scale):
        """Image of the barrier under ``x -> scale * (x - origin)``."""
        origin = np.asarray(origin, dtype=float)
        if self.kind == "plane":
            off = scale * (self.offset - float(origin @ self.normal))
            return Barrier.plane(self.normal, off, self.orientation)
        return Barrier.sphere(scale * (self.center - origin), scale * self.radius,
                              self.orientation)

    # -- profile-plane bridge ---------------------------------------------
    def profile_params(self, axisym=True):
        """Parameters ``[n_r, n_z, offset, c_r, c_z, R, orientation]`` for the kernels.

        In axisymmetric mode the barrier must be rotationally symmetric about
        the z-axis (plane normal along z, sphere centre on the axis); points
        ``(r, z)`` are embedded as ``(r, 0, z)``.
        """
        o = float(self.orientation)
        if axisym:
            if self.dim != 3:
                raise UnsupportedBarrierError("axisymmetric mode needs a barrier in R^3")
            if self.kind == "plane":
                n = self.normal
                if abs(n[0]) > 0 or abs(n[1]) > 0:
                    raise UnsupportedBarrierError("plane must be normal to the symmetry axis")
                return np.array([0.0, n[2], self.offset, 0.0, 0.0, 0.0, o])
            c = self.center
            if abs(c[0]) > 0 or abs(c[1]) > 0:
                raise UnsupportedBarrierError("sphere centre must lie on the symmetry axis")
            return np.array([0.0, 0.0, 0.0, 0.0, c[2], self.radius, o])
        if self.dim != 2:
            raise UnsupportedBarrierError("planar mode needs a barrier in R^2")
        if self.kind == "plane":
            return np.array([self.normal[0], self.normal[1], self.offset, 0.0, 0.0, 0.0, o])
        return np.array([0.0, 0.0, 0.0, self.center[0], self.center[1], self.radius, o])

    # -- pointwise geometry -----------------------------------------------
    def _points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[-1] != self.dim:
            raise PreconditionError(f"points must have {self.dim} components")
        return x, single

    def raw_distance(self, x):
        """Exact signed distance, positive on the side ``nu_S`` points to."""
        x, single = self._points(x)
        if self.kind == "plane":
            d = x @ self.normal - self.offset
        else:
            d = np.linalg.norm(x - self.center, axis=-1) - self.radius
        d = self.orientation * d
        return d[0] if single else d

    def project(self, x):
        """Nearest point on the barrier (the centre maps to an arbitrary pole)."""
        x, single = self._points(x)
        if self.kind == "plane":
            p = x - np.outer(x @ self.normal - self.offset, self.normal)
        else:
            v = x - self.center
            nv = np.linalg.norm(v, axis=-1, keepdims=True)
            pole = np.zeros(self.dim)
            pole[-1] = 1.0
            v = np.where(nv > 0, v / np.where(nv > 0, nv, 1.0), pole)
            p = self.center + self.radius * v
        return p[0] if single else p

    def unit_normal(self, x):
        """``nu_S`` at the nearest point of ``x`` (defined off the barrier too)."""
        x, single = self._points(x)
        if self.kind == "plane":
            nu = np.tile(self.orientation * self.normal, (x.shape[0], 1))
        else:
            v = x - self.center
            nv = np.linalg.norm(v, axis=-1, keepdims=True)
            pole = np.zeros(self.dim)
            pole[-1] = 1.0
            nu = self.orientation * np.where(nv > 0, v / np.where(nv > 0, nv, 1.0), pole)
        return nu[0] if single else nu

    def curvature_scalar(self):
        """``kappa`` with ``k = kappa * (I - nu_S nu_S^T)`` (0 for planes)."""
        if self.kind == "plane":
            return 0.0
        return self.orientation / self.radius

    def normal_and_shape(self, x, tol=ON_SURFACE_TOL):
        """``(nu_S, k, K)`` at a point on the barrier.

        ``k`` is returned as an ambient ``dim x dim`` matrix that vanishes on
        ``nu_S`` (the shape operator on ``T_x S``) and ``K = tr k``.

        Raises
        ------
        GeometryError
            If ``x`` is farther than ``tol * max(1, R)`` from the barrier.
        """
        x = np.asarray(x, dtype=float)
        scale = 1.0 if self.kind == "plane" else max(1.0, self.radius)
        dist = abs(self.raw_distance(x))
        if dist > tol * scale:
            raise GeometryError(f"point {x.tolist()} is {dist:.3e} off the barrier")
        nu = self.unit_normal(x)
        kappa = self.curvature_scalar()
        k = kappa * (np.eye(self.dim) - np.outer(nu, nu))
        return nu, k, float(np.trace(k))

    # -- extensions -------------------------------------------------------
    def _cutoff(self, x):
        return bump(self.raw_distance(x) / self.tubular_radius)

    def signed_distance(self, x):
        """Smoothly clamped signed distance ``d`` with values in ``[-1, 1]``.

        ``d = G(delta)`` with ``delta`` the exact signed distance and
        ``G(s) = (1 - beta) s + beta sign(s)``, where ``beta`` rises smoothly
        from 0 at ``|s| = tube/2`` to 1 at ``|s| = tube``.  Hence ``d = delta``
        near the barrier (unit normal derivative) and ``d = +-1`` far away.
        """
        delta = np.asarray(self.raw_distance(x), dtype=float)
        t = self.tubular_radius
        a = np.abs(delta)
        beta = smoothstep((a - 0.5 * t) / (0.5 * t))
        return (1.0 - beta) * delta + beta * np.sign(delta)

    def extension_field_X(self, x):
        """``nu_S`` extended off the barrier, cut off outside the tube; ``|X| <= 1``."""
        psi = np.asarray(self._cutoff(x))
        nu = self.unit_normal(x)
        return nu * psi[..., None] if nu.ndim > 1 else nu * float(psi)

    def extension_shape(self, x):
        """Extended shape operator ``k`` as an ambient matrix field."""
        x2, single = self._points(x)
        psi = np.atleast_1d(self._cutoff(x2))
        nu = self.unit_normal(x2)
        kappa = self.curvature_scalar()
        k = kappa * (np.eye(self.dim)[None] - nu[:, :, None] * nu[:, None, :])
        k = k * psi[:, None, None]
        return k[0] if single else k

    def extension_field_V(self, x):
        """Radial unit field ``(x - c)/|x - c|`` of a sphere barrier.

        Multiplied by ``chi(|x - c| / R)``, a smooth cut-off equal to 1 on
        ``[1/4, 4]`` and vanishing near the centre and at infinity, so ``V``
        extends ``nu_S`` with zero derivative along ``nu_S`` on the barrier.

        Raises
        ------
        UnsupportedBarrierError
            For plane barriers.
        """
        if self.kind != "sphere":
            raise UnsupportedBarrierError("the radial field V is defined for sphere barriers only")
        x2, single = self._points(x)
        v = x2 - self.center
        nv = np.linalg.norm(v, axis=-1)
        rho = nv / self.radius
        chi = smoothstep((rho - 0.125) / 0.125) * (1.0 - smoothstep((rho - 4.0) / 4.0))
        safe = np.where(nv > 0, nv, 1.0)
        out = self.orientation * v / safe[:, None] * chi[:, None]
        return out[0] if single else out

    def perturbation_tensor(self, x, nu, frame, tol=1e-8):
        """Matrix ``T_ij = T(e_i, e_j, nu)`` in an orthonormal tangent frame.

        ``T(X, Y, Z) = k(X, Z) <Y, nu_S> + k(Y, Z) <X, nu_S>`` with the
        extended ``k`` and ``nu_S``.  Vectorised: ``x`` and ``nu`` of shape
        ``(m, dim)`` and ``frame`` of shape ``(m, p, dim)`` give ``(m, p, p)``.

        Raises
        ------
        PreconditionError
            If the frame is not orthonormal or not orthogonal to ``nu``.
        """
        x2, single = self._points(x)
        nu = np.atleast_2d(np.asarray(nu, dtype=float))
        frame = np.asarray(frame, dtype=float)
        if frame.ndim == 2:
            frame = frame[None]
        gram = np.einsum("mid,mjd->mij", frame, frame)
        p = frame.shape[1]
        if np.max(np.abs(gram - np.eye(p)[None])) > tol:
            raise PreconditionError("frame is not orthonormal")
        if np.max(np.abs(np.einsum("mid,md->mi", frame, nu))) > tol:
            raise PreconditionError("frame is not orthogonal to nu")
        k = np.atleast_3d(self.extension_shape(x2))
        if k.ndim == 2:
            k = k[None]
        nS = np.atleast_2d(self.extension_field_X(x2))
        kEn = np.einsum("mid,mde,me->mi", frame, k, nu)  # k(e_i, nu)
        eS = np.einsum("mid,md->mi", frame, nS)  # <e_i, nu_S>
        T = kEn[:, :, None] * eS[:, None, :] + kEn[:, None, :] * eS[:, :, None]
        return T[0] if single else T

    def calibrate_D0(self, n_dirs=4000, n_points=9, margin=0.1):
        """Smallest ``D0`` on a ``margin`` grid with ``T(X, X, nu) + D0 >= 1``.

        For fixed unit ``X`` the minimum over unit ``nu`` is
        ``-2 |k X| |<X, nu_S>|``; ``X`` runs over a Fibonacci lattice of
        directions and the base point over samples across the tube.
        """
        if self.kind == "plane":
            return 1.0
        dirs = _fibonacci_dirs(n_dirs, self.dim)
        # base points: one barrier point pushed across the tube (the sphere is homogeneous)
        base = self.center.copy()
        base[-1] += self.radius
        nu0 = self.unit_normal(base)
        offs = np.linspace(-0.9, 0.9, n_points) * self.tubular_radius
        worst = 0.0
        for o in offs:
            p = base + o * nu0 * self.orientation
            k = self.extension_shape(p)
            nS = self.extension_field_X(p)
            kX = dirs @ k.T
            val = -2.0 * np.linalg.norm(kX, axis=1) * np.abs(dirs @ nS)
            worst = min(worst, float(val.min()))
        need = 1.0 - worst
        steps = np.ceil(np.round((need - 1.0) / margin, 9))
        return float(1.0 + max(steps, 0.0) * margin)

    def cutoff_phi(self, x, t, alpha, b):
        """``phi = exp(-alpha t - 2 b d(x))`` (strictly positive)."""
        if alpha < 0 or b < 0:
            raise PreconditionError("alpha and b must be non-negative")
        return np.exp(-alpha * t - 2.0 * b * self.signed_distance(x))

    def ambient_fields(self, alpha=0.0, b_const=1.0):
        return AmbientFields(self.tubular_radius, self.calibrate_D0(), alpha, b_const)


def _fibonacci_dirs(n, dim):
    if dim == 2:
        a = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    rr = np.sqrt(1.0 - z * z)
    th = np.pi * (1.0 + 5**0.5) * i
    return np.stack([rr * np.cos(th), rr * np.sin(th), z], axis=1)
