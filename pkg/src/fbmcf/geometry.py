"""Discrete surfaces: profile curves, curvature, differential operators, quadrature.

A :class:`ProfileCurve` stores nodes ``(r, z)`` of the generating curve of
a surface of revolution about the z-axis (``n_dim = 2``) or the nodes
``(x, y)`` of a planar curve (``n_dim = 1``).  Each open end is on the
symmetry axis (``"axis"``), on the barrier (``"barrier"``) or
unconstrained (``"free"``, geometry only).

Orientation: with ``T`` the unit tangent along increasing node index and
``J`` the counter-clockwise quarter turn, the unit normal is
``nu = orientation * J T``.  Curvatures follow ``h(X, Y) = <D_X nu, Y>``:
``lam1 = -<X_ss, nu>`` and, for surfaces of revolution, ``lam2 = nu_r / r``,
so a round sphere with outward normal has ``lam1 = lam2 = 1/rho > 0``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels as K
from .barrier import Barrier
from .exceptions import GeometryError, PreconditionError, ResolutionError

__all__ = [
    "ProfileCurve",
    "CurvatureField",
    "BoundaryFrame",
    "fundamental_forms",
    "arclength",
    "arclength_derivatives",
    "laplace_beltrami",
    "conormal_derivative",
    "boundary_frame",
    "integrate_bulk",
    "integrate_boundary",
    "area",
    "node_weights",
    "redistribute",
    "self_intersects",
    "half_sphere",
    "perturbed_half_sphere",
    "spherical_cap",
    "perturbed_cap",
    "equatorial_disk",
    "circle",
    "torus_profile",
]

END_CODES = {"free": K.END_FREE, "axis": K.END_AXIS, "barrier": K.END_BARRIER}
BARRIER_CODES = {None: K.BARRIER_NONE, "plane": K.BARRIER_PLANE, "sphere": K.BARRIER_SPHERE}
ON_BARRIER_TOL = 1e-8


@dataclass
class ProfileCurve:
    """Discretised hypersurface (see module docstring for conventions)."""

    r: np.ndarray
    z: np.ndarray
    end0: str = "axis"
    end1: str = "barrier"
    n_dim: int = 2
    orientation: float = 1.0
    barrier: Barrier | None = None
    closed: bool = False

    def __post_init__(self):
        self.r = np.array(self.r, dtype=float)
        self.z = np.array(self.z, dtype=float)
        self.orientation = float(self.orientation)
        self.validate()

    # -- invariants -------------------------------------------------------
    def validate(self):
        """Check the hard invariants; raise :class:`GeometryError` otherwise."""
        r, z = self.r, self.z
        if r.ndim != 1 or r.shape != z.shape:
            raise GeometryError("r and z must be 1-D arrays of equal length")
        if r.size < 4:
            raise ResolutionError("a profile curve needs at least 4 nodes")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(z))):
            raise GeometryError("non-finite node coordinates")
        if self.n_dim not in (1, 2):
            raise GeometryError("n_dim must be 1 or 2")
        if self.orientation not in (1.0, -1.0):
            raise GeometryError("orientation must be +1 or -1")
        if np.any(K.segment_lengths(r, z, self.closed) == 0.0):
            raise GeometryError("consecutive nodes coincide")
        if self.closed:
            return
        for e, kind in ((0, self.end0), (1, self.end1)):
            if kind not in END_CODES:
                raise GeometryError(f"unknown end kind {kind!r}")
            idx = 0 if e == 0 else -1
            if kind == "axis":
                if not self.axisym:
                    raise GeometryError("axis ends exist only in axisymmetric mode")
                if r[idx] != 0.0:
                    raise GeometryError(f"axis end node has r = {r[idx]!r}")
            elif kind == "barrier":
                if self.barrier is None:
                    raise GeometryError("barrier end without a barrier")
                d = abs(self.barrier.raw_distance(self.embed(np.array([idx]))[0]))
                if d > ON_BARRIER_TOL * max(1.0, self.barrier.radius or 1.0):
                    raise GeometryError(f"barrier end node is {d:.3e} off the barrier")
        if self.axisym:
            lo = 1 if self.end0 == "axis" else 0
            hi = r.size - 1 if self.end1 == "axis" else r.size
            if np.any(r[lo:hi] <= 0.0):
                bad = lo + int(np.argmax(r[lo:hi] <= 0.0))
                raise GeometryError(f"node {bad} has r = {r[bad]!r} <= 0 off the axis")

    # -- conveniences -----------------------------------------------------
    @property
    def axisym(self):
        return self.n_dim == 2

    @property
    def n_nodes(self):
        return self.r.size

    @property
    def nodes(self):
        return np.stack([self.r, self.z], axis=1)

    @property
    def end_codes(self):
        return END_CODES[self.end0], END_CODES[self.end1]

    @property
    def barrier_code(self):
        return BARRIER_CODES[None if self.barrier is None else self.barrier.kind]

    def barrier_params(self):
        if self.barrier is None:
            return np.zeros(7)
        return self.barrier.profile_params(self.axisym)

    def kernel_args(self):
        """Positional arguments shared by the compiled kernels (after ``r, z``)."""
        e0, e1 = self.end_codes
        return (self.axisym, self.closed, e0, e1, self.barrier_code,
                self.barrier_params(), self.orientation)

    def barrier_ends(self):
        """Indices of nodes on the barrier."""
        if self.closed:
            return []
        out = []
        if self.end0 == "barrier":
            out.append(0)
        if self.end1 == "barrier":
            out.append(self.n_nodes - 1)
        return out

    def segment_lengths(self):
        return K.segment_lengths(self.r, self.z, self.closed)

    @property
    def spacing_ratio(self):
        seg = self.segment_lengths()
        return float(seg.max() / seg.min())

    def embed(self, idx=None):
        """Ambient coordinates: ``(r, 0, z)`` in axisymmetric mode, ``(x, y)`` otherwise."""
        r = self.r if idx is None else self.r[idx]
        z = self.z if idx is None else self.z[idx]
        if self.axisym:
            return np.stack([r, np.zeros_like(r), z], axis=1)
        return np.stack([r, z], axis=1)

    def embed_vectors(self, vr, vz):
        if self.axisym:
            return np.stack([vr, np.zeros_like(vr), vz], axis=1)
        return np.stack([vr, vz], axis=1)

    def with_nodes(self, r, z):
        return ProfileCurve(r, z, self.end0, self.end1, self.n_dim, self.orientation,
                            self.barrier, self.closed)

    def copy(self):
        return self.with_nodes(self.r.copy(), self.z.copy())

    def to_dict(self):
        return {
            "nodes": self.nodes.tolist(),
            "end_flags": [self.end0, self.end1],
            "n_dim": self.n_dim,
            "orientation": self.orientation,
            "closed": self.closed,
            "barrier": None if self.barrier is None else self.barrier.to_dict(),
        }

    @classmethod
    def from_dict(cls, d, barrier=None):
        nodes = np.asarray(d["nodes"], dtype=float)
        b = barrier
        if b is None and d.get("barrier") is not None:
            b = Barrier.from_dict(d["barrier"])
        return cls(nodes[:, 0], nodes[:, 1], d["end_flags"][0], d["end_flags"][1],
                   d.get("n_dim", 2), d.get("orientation", 1.0), b, d.get("closed", False))


@dataclass
class CurvatureField:
    """Per-node metric, second fundamental form and derived scalars.

    ``g11 = |X_u|^2`` and ``h11 = lam1 g11`` refer to the node-index
    parameter ``u``; ``g22 = r^2`` and ``h22 = lam2 g22`` to the rotation
    angle.  ``dV`` is the area element per unit ``u`` (including ``2 pi r``
    in axisymmetric mode).
    """

    lam1: np.ndarray
    lam2: np.ndarray
    nu: np.ndarray
    tangent: np.ndarray
    speed: np.ndarray
    g11: np.ndarray
    g22: np.ndarray
    h11: np.ndarray
    h22: np.ndarray
    H: np.ndarray
    A_norm: np.ndarray
    dV: np.ndarray
    n_dim: int = 2

    @property
    def principal(self):
        """Principal curvatures as an ``(m, n)`` array."""
        if self.n_dim == 1:
            return self.lam1[:, None]
        return np.stack([self.lam1, self.lam2], axis=1)

    @property
    def S1(self):
        return self.H

    @property
    def S2(self):
        return self.lam1 * self.lam2 if self.n_dim == 2 else np.zeros_like(self.H)


@dataclass
class BoundaryFrame:
    """Frame at a barrier end: conormal ``N``, normal ``nu``, defect angle."""

    index: int
    N: np.ndarray
    nu: np.ndarray
    angular: np.ndarray | None
    nu_S: np.ndarray
    defect: float


def fundamental_forms(curve):
    """Compute the :class:`CurvatureField` of a curve.

    Raises
    ------
    GeometryError
        If ``r = 0`` at a node that is not an axis end.
    """
    if curve.axisym:
        zero = np.flatnonzero(curve.r == 0.0)
        allowed = set()
        if not curve.closed:
            if curve.end0 == "axis":
                allowed.add(0)
            if curve.end1 == "axis":
                allowed.add(curve.n_nodes - 1)
        bad = [int(i) for i in zero if int(i) not in allowed]
        if bad:
            raise GeometryError(f"r = 0 at non-axis node(s) {bad}")
    lam1, lam2, nur, nuz, tr, tz, speed = K.curve_geometry(curve.r, curve.z,
                                                           *curve.kernel_args())
    if not curve.axisym:
        lam2 = np.zeros_like(lam1)
    H = lam1 + lam2
    A = np.sqrt(lam1**2 + lam2**2)
    if curve.axisym:
        g22 = curve.r**2
        dV = 2.0 * np.pi * curve.r * speed
    else:
        g22 = np.zeros_like(lam1)
        dV = speed.copy()
    g11 = speed**2
    return CurvatureField(
        lam1=lam1, lam2=lam2, nu=np.stack([nur, nuz], axis=1),
        tangent=np.stack([tr, tz], axis=1), speed=speed, g11=g11, g22=g22,
        h11=lam1 * g11, h22=lam2 * g22, H=H, A_norm=A, dV=dV, n_dim=curve.n_dim,
    )


def arclength(curve):
    """Cumulative chord length from node 0."""
    seg = curve.segment_lengths()
    if curve.closed:
        seg = seg[:-1]
    return np.concatenate([[0.0], np.cumsum(seg)])


def _one_sided_weights(s_end):
    """Derivative weights at ``s_end[0]`` from four chord positions."""
    d = np.abs(s_end - s_end[0])
    return K._fd_weights(d[1], d[2], d[3])


def arclength_derivatives(curve, f):
    """First and second arclength derivatives of a nodal field.

    Interior nodes use three-point chord-length stencils (second order on
    smooth meshes); axis ends use the even reflection ``f(-s) = f(s)``;
    other open ends use four-point one-sided stencils; closed curves are
    periodic.
    """
    f = np.asarray(f, dtype=float)
    n = curve.n_nodes
    if f.shape != (n,):
        raise PreconditionError(f"field must have shape ({n},)")
    seg = curve.segment_lengths()
    fs = np.empty(n)
    fss = np.empty(n)
    if curve.closed:
        hm = np.roll(seg, 1)
        hp = seg
        fm = np.roll(f, 1)
        fp = np.roll(f, -1)
        den = hm * hp * (hm + hp)
        fs[:] = (hm * hm * (fp - f) + hp * hp * (f - fm)) / den
        fss[:] = 2.0 * (hm * (fp - f) - hp * (f - fm)) / den
        return fs, fss
    hm = seg[:-1]
    hp = seg[1:]
    den = hm * hp * (hm + hp)
    fi, fm, fp = f[1:-1], f[:-2], f[2:]
    fs[1:-1] = (hm * hm * (fp - fi) + hp * hp * (fi - fm)) / den
    fss[1:-1] = 2.0 * (hm * (fp - fi) - hp * (fi - fm)) / den
    s = arclength(curve)
    for e, kind in ((0, curve.end0), (1, curve.end1)):
        i = 0 if e == 0 else n - 1
        if kind == "axis":
            nb = 1 if e == 0 else n - 2
            h = seg[0] if e == 0 else seg[-1]
            fs[i] = 0.0
            fss[i] = 2.0 * (f[nb] - f[i]) / (h * h)
        else:
            idx = np.arange(4) if e == 0 else np.arange(n - 1, n - 5, -1)
            w1, w2 = _one_sided_weights(s[idx])
            sgn = 1.0 if e == 0 else -1.0
            fs[i] = sgn * np.dot(w1, f[idx])
            fss[i] = np.dot(w2, f[idx])
    return fs, fss


def laplace_beltrami(curve, f, field=None):
    """Laplace-Beltrami operator of an axisymmetric (or planar) nodal field.

    ``Delta f = f_ss + (r_s / r) f_s`` off the axis, ``2 f_ss`` on it, and
    ``f_ss`` in planar mode.

    Raises
    ------
    ResolutionError
        If the curve has fewer than 5 nodes.
    """
    if curve.n_nodes < 5:
        raise ResolutionError("laplace_beltrami needs at least 5 nodes")
    fs, fss = arclength_derivatives(curve, f)
    if not curve.axisym:
        return fss
    if field is None:
        field = fundamental_forms(curve)
    rs = field.tangent[:, 0]
    out = fss.copy()
    on_axis = curve.r == 0.0
    out[~on_axis] += rs[~on_axis] / curve.r[~on_axis] * fs[~on_axis]
    out[on_axis] = 2.0 * fss[on_axis]
    return out


def conormal_derivative(curve, f, end=None):
    """Outward conormal derivative ``N f`` at a barrier end.

    Raises
    ------
    PreconditionError
        If the curve has no barrier end.
    """
    ends = curve.barrier_ends()
    if not ends:
        raise PreconditionError("curve has no barrier end")
    i = ends[-1] if end is None else (0 if end == 0 else curve.n_nodes - 1)
    if i not in ends:
        raise PreconditionError(f"end {end!r} is not on the barrier")
    fs, _ = arclength_derivatives(curve, f)
    return float(fs[i] if i > 0 else -fs[i])


def boundary_frame(curve, end=None):
    """:class:`BoundaryFrame` at a barrier end.

    The conormal is measured with the stencil that imposes the contact
    condition: the reflected central difference at a plane, the four-point
    one-sided chord stencil at a sphere.
    """
    ends = curve.barrier_ends()
    if not ends:
        raise PreconditionError("curve has no barrier end")
    i = ends[-1] if end is None else (0 if end == 0 else curve.n_nodes - 1)
    e = 0 if i == 0 else 1
    bpar = curve.barrier_params()
    r, z = curve.r, curve.z
    if curve.barrier.kind == "plane":
        nb = 1 if e == 0 else curve.n_nodes - 2
        gx, gy = K._reflect_plane(bpar, r[nb], z[nb])
        tr, tz = (r[nb] - gx, z[nb] - gy) if e == 0 else (gx - r[nb], gy - z[nb])
    else:
        tr, tz, _, _ = K._one_sided(r, z, e)
    t = np.array([tr, tz]) / np.hypot(tr, tz)
    N = t if e == 1 else -t
    o = curve.orientation
    nu = np.array([-o * t[1], o * t[0]])
    nS = curve.barrier.unit_normal(curve.embed(np.array([i]))[0])
    Nv = curve.embed_vectors(np.array([N[0]]), np.array([N[1]]))[0]
    nuv = curve.embed_vectors(np.array([nu[0]]), np.array([nu[1]]))[0]
    cross = np.linalg.norm(np.cross(Nv, nS)) if Nv.size == 3 else abs(Nv[0] * nS[1] - Nv[1] * nS[0])
    defect = float(np.arctan2(cross, np.dot(Nv, nS)))
    angular = np.array([0.0, 1.0, 0.0]) if curve.axisym else None
    return BoundaryFrame(i, Nv, nuv, angular, nS, defect)


def integrate_bulk(curve, f):
    """Trapezoidal ``int_Sigma f dV`` (``2 pi r`` weight in axisymmetric mode)."""
    f = np.broadcast_to(np.asarray(f, dtype=float), curve.r.shape)
    w = f * (2.0 * np.pi * curve.r if curve.axisym else 1.0)
    seg = curve.segment_lengths()
    if curve.closed:
        return float(np.sum(0.5 * (w + np.roll(w, -1)) * seg))
    return float(np.sum(0.5 * (w[:-1] + w[1:]) * seg))


def node_weights(curve):
    """Quadrature weights with ``integrate_bulk(f) == sum(weights * f)``."""
    a = 2.0 * np.pi * curve.r if curve.axisym else np.ones_like(curve.r)
    seg = curve.segment_lengths()
    w = np.zeros_like(curve.r)
    if curve.closed:
        w += 0.5 * a * seg
        w += 0.5 * a * np.roll(seg, 1)
        return w
    w[:-1] += 0.5 * a[:-1] * seg
    w[1:] += 0.5 * a[1:] * seg
    return w


def integrate_boundary(curve, f):
    """``int_{dSigma} f``: nodal value times ``2 pi r`` (axisym) or 1 (planar)."""
    f = np.broadcast_to(np.asarray(f, dtype=float), curve.r.shape)
    total = 0.0
    for i in curve.barrier_ends():
        total += f[i] * (2.0 * np.pi * curve.r[i] if curve.axisym else 1.0)
    return float(total)


def area(curve):
    return integrate_bulk(curve, 1.0)


def redistribute(curve, n_nodes=None):
    """Resample equally in arclength with a cubic spline (same end flags).

    Axis ends are mirrored (``r`` odd, ``z`` even), plane-barrier ends are
    reflected across the plane, closed curves are periodic.  End conditions
    are re-imposed afterwards.
    """
    n = curve.n_nodes if n_nodes is None else int(n_nodes)
    r, z = curve.r, curve.z
    s = arclength(curve)
    if curve.closed:
        L = s[-1] + curve.segment_lengths()[-1]
        S = np.concatenate([s, [L]])
        R = np.concatenate([r, r[:1]])
        Z = np.concatenate([z, z[:1]])
        cr = CubicSpline(S, R, bc_type="periodic")
        cz = CubicSpline(S, Z, bc_type="periodic")
        u = np.linspace(0.0, L, n, endpoint=False)
        return curve.with_nodes(cr(u), cz(u))
    S, R, Z = s, r, z
    bpar = curve.barrier_params()
    L = s[-1]
    m = min(6, curve.n_nodes - 1)
    for e, kind in ((0, curve.end0), (1, curve.end1)):
        mirror = None
        if kind == "axis":
            mirror = "axis"
        elif kind == "barrier" and curve.barrier.kind == "plane":
            mirror = "plane"
        if mirror is None:
            continue
        if e == 0:
            sl, rl, zl = -s[m:0:-1], r[m:0:-1], z[m:0:-1]
        else:
            sl, rl, zl = 2 * L - s[-2:-m - 2:-1], r[-2:-m - 2:-1], z[-2:-m - 2:-1]
        if mirror == "axis":
            gr, gz = -rl, zl.copy()
        else:
            gr = np.empty_like(rl)
            gz = np.empty_like(zl)
            for j in range(rl.size):
                gr[j], gz[j] = K._reflect_plane(bpar, rl[j], zl[j])
        if e == 0:
            S, R, Z = np.concatenate([sl, S]), np.concatenate([gr, R]), np.concatenate([gz, Z])
        else:
            S, R, Z = np.concatenate([S, sl]), np.concatenate([R, gr]), np.concatenate([Z, gz])
    cr = CubicSpline(S, R)
    cz = CubicSpline(S, Z)
    u = np.linspace(0.0, L, n)
    rn, zn = cr(u), cz(u)
    rn[0], zn[0], rn[-1], zn[-1] = r[0], z[0], r[-1], z[-1]
    if curve.end0 == "axis":
        rn[0] = 0.0
    if curve.end1 == "axis":
        rn[-1] = 0.0
    e0, e1 = curve.end_codes
    K.enforce_ends(rn, zn, False, e0, e1, curve.barrier_code, bpar)
    return curve.with_nodes(rn, zn)


def self_intersects(curve):
    """True if two non-adjacent segments of the profile cross."""
    P = curve.nodes
    A = P[:-1] if not curve.closed else P
    B = P[1:] if not curve.closed else np.roll(P, -1, axis=0)
    m = A.shape[0]

    def orient(p, q, r_):
        return np.sign((q[..., 0] - p[..., 0]) * (r_[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r_[..., 0] - p[..., 0]))

    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    block = 256
    for i0 in range(0, m, block):
        i1 = min(m, i0 + block)
        a, b = A[i0:i1, None], B[i0:i1, None]
        c, d = A[None], B[None]
        box = np.all((lo[i0:i1, None] <= hi[None]) & (lo[None] <= hi[i0:i1, None]), axis=-1)
        if not box.any():
            continue
        cross = (orient(a, b, c) * orient(a, b, d) < 0) & (orient(c, d, a) * orient(c, d, b) < 0)
        ii, jj = np.nonzero(cross & box)
        ii = ii + i0
        adj = np.abs(ii - jj) <= 1
        if curve.closed:
            adj |= np.abs(ii - jj) == m - 1
        if np.any(~adj):
            return True
    return False


# -- constructors ------------------------------------------------------------

def _close(curve):
    """Impose the end conditions (projection at t = 0)."""
    r, z = curve.r.copy(), curve.z.copy()
    e0, e1 = curve.end_codes
    K.enforce_ends(r, z, curve.closed, e0, e1, curve.barrier_code, curve.barrier_params())
    return curve.with_nodes(r, z)


def half_sphere(radius=1.0, n_nodes=128, barrier=None, warp=0.0):
    """Half-sphere of ``radius`` centred on the plane ``z = 0`` (outward normal).

    The default barrier is that plane with ``nu_S = -e_z`` (pointing away
    from the surface, i.e. along its outward conormal).  ``warp`` in
    ``[0, 1)`` spaces the nodes non-uniformly in angle,
    ``theta(u) = (pi/2)(u + warp sin(2 pi u)/(2 pi))``, keeping the map odd
    at the axis and at the plane; uniform nodes move by exact homothety, so
    a warp is what exposes truncation error in residual studies.
    """
    if barrier is None:
        barrier = Barrier.plane((0.0, 0.0, 1.0), 0.0, orientation=-1)
    if not 0.0 <= warp < 1.0:
        raise PreconditionError("warp must lie in [0, 1)")
    u = np.linspace(0.0, 1.0, n_nodes)
    th = 0.5 * np.pi * (u + warp * np.sin(2.0 * np.pi * u) / (2.0 * np.pi))
    r = radius * np.sin(th)
    z = radius * np.cos(th)
    r[0] = 0.0
    z[-1] = 0.0
    return ProfileCurve(r, z, "axis", "barrier", 2, 1.0, barrier)


def perturbed_half_sphere(amplitude=0.1, mode=1, n_nodes=128, radius=1.0):
    """Star-shaped profile ``rho(theta) = radius (1 + amplitude cos(2 mode theta))``.

    Every mode is even about the axis and has ``rho'(pi/2) = 0``, so the
    surface is smooth at the axis and meets the plane ``z = 0``
    orthogonally.  Unlike the half-sphere it is not moved by a homothety,
    which makes it the oracle for convergence studies of the evolution
    residuals.
    """
    if not 0.0 <= amplitude < 1.0:
        raise PreconditionError("amplitude must lie in [0, 1)")
    th = np.linspace(0.0, 0.5 * np.pi, n_nodes)
    rho = radius * (1.0 + amplitude * np.cos(2 * mode * th))
    r = rho * np.sin(th)
    z = rho * np.cos(th)
    r[0] = 0.0
    z[-1] = 0.0
    return _close(half_sphere(radius, n_nodes).with_nodes(r, z))


def _cap_geometry(theta):
    if not 0.0 < theta < 0.5 * np.pi:
        raise PreconditionError("cap opening angle must lie in (0, pi/2)")
    return 1.0 / np.tan(theta), 1.0 / np.sin(theta)


def spherical_cap(theta, n_nodes=128):
    """Spherical cap meeting the unit sphere orthogonally.

    The cap has radius ``cot(theta)`` and centre ``(0, 1/sin(theta))`` and
    bounds, with the unit sphere, a convex lens around the north pole.  Its
    boundary circle lies at polar angle ``pi/2 - theta`` on the unit sphere.
    The normal points out of the lens, so ``H = 2 tan(theta) > 0``.
    """
    rho, c = _cap_geometry(theta)
    a = np.linspace(0.0, theta, n_nodes)
    r = rho * np.sin(a)
    z = c - rho * np.cos(a)
    r[0] = 0.0
    r[-1], z[-1] = np.cos(theta), np.sin(theta)
    curve = ProfileCurve(r, z, "axis", "barrier", 2, -1.0, Barrier.sphere())
    return _close(curve)


def perturbed_cap(theta, amplitudes=(), n_nodes=128):
    """Orthogonal cap with radial modes ``cos(m pi a / theta) - (-1)^m``.

    Mode ``m`` (``m = 1, 2, ...``) with amplitude ``amplitudes[m-1]``
    multiplies the cap radius by ``1 + eps_m psi_m(a)``.  Every mode and its
    derivative vanish at the boundary angle, so the contact point and the
    orthogonality are unchanged; the axis stays smooth.
    """
    rho, c = _cap_geometry(theta)
    a = np.linspace(0.0, theta, n_nodes)
    fac = np.ones_like(a)
    for m, eps in enumerate(amplitudes, start=1):
        fac += eps * (np.cos(m * np.pi * a / theta) - (-1.0) ** m)
    if np.any(fac <= 0):
        raise PreconditionError("perturbation amplitudes make the radius non-positive")
    r = rho * fac * np.sin(a)
    z = c - rho * fac * np.cos(a)
    r[0] = 0.0
    r[-1], z[-1] = np.cos(theta), np.sin(theta)
    curve = ProfileCurve(r, z, "axis", "barrier", 2, -1.0, Barrier.sphere())
    curve = _close(curve)
    if curve.spacing_ratio > 1.5:
        curve = redistribute(curve)
    return curve


def equatorial_disk(n_nodes=128, radius=1.0):
    """Flat disk ``z = 0`` spanning a sphere barrier of ``radius`` (minimal, H = 0)."""
    r = np.linspace(0.0, radius, n_nodes)
    z = np.zeros(n_nodes)
    return ProfileCurve(r, z, "axis", "barrier", 2, 1.0, Barrier.sphere(radius=radius))


def circle(radius=1.0, n_nodes=128, center=(0.0, 0.0)):
    """Closed planar circle (counter-clockwise, outward normal)."""
    th = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    x = center[0] + radius * np.cos(th)
    y = center[1] + radius * np.sin(th)
    return ProfileCurve(x, y, "free", "free", 1, -1.0, None, closed=True)


def torus_profile(a=0.5, rho0=2.0, n_nodes=128):
    """Closed profile circle of radius ``a`` about ``(rho0, 0)`` (a torus)."""
    if not rho0 > a > 0:
        raise PreconditionError("need rho0 > a > 0")
    th = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    return ProfileCurve(rho0 + a * np.cos(th), a * np.sin(th), "free", "free", 2, -1.0,
                        None, closed=True)
