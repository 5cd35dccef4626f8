"""Perturbed curvature, pinching functionals and residual checks.

Everything here is evaluated on axisymmetric profiles (or planar curves)
in the orthonormal frame ``(T, e_theta)`` of the profile tangent and the
rotation direction, in which ``h = diag(lam1, lam2)``.  For barriers that
are symmetric about the axis the perturbation tensor is diagonal in that
frame too, so the perturbed and twice-perturbed forms are diagonal.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConsistencyError,
    MeanConvexityError,
    PreconditionError,
    UndefinedQuotientError,
)
from .geometry import (
    arclength_derivatives,
    conormal_derivative,
    fundamental_forms,
    laplace_beltrami,
)
from .symm_poly import QUOTIENT_TOL, elementary_symmetric_all

__all__ = [
    "PerturbedCurvature",
    "TwicePerturbedCurvature",
    "PinchParams",
    "frame_vectors",
    "perturbed",
    "twice_perturbed",
    "select_D",
    "phi_heat_defect",
    "select_alpha",
    "pinch_functionals",
    "umbilic_functional",
    "boundary_residuals",
    "evolution_residuals",
    "grad_A_bar_sq",
    "gradient_term_check",
    "pinch_series",
    "fit_exponential_rate",
    "PINCH_KEYS",
]


@dataclass
class PerturbedCurvature:
    """``hbar = h + T_nu + D0 g`` per node, in the ``(T, e_theta)`` frame."""

    hbar: np.ndarray
    T: np.ndarray
    lam_bar: np.ndarray
    H_bar: np.ndarray
    A_bar: np.ndarray
    D0: float

    @property
    def diag(self):
        """Frame-diagonal entries (profile, rotation) of ``hbar``."""
        return np.einsum("mii->mi", self.hbar)


@dataclass
class TwicePerturbedCurvature:
    """``b = hbar + (eps H + D - D0) g`` and its symmetric functions."""

    lam_tilde: np.ndarray
    H_tilde: np.ndarray
    A_tilde: np.ndarray
    S: np.ndarray
    Q: np.ndarray
    margin: np.ndarray
    eps: float
    D: float
    shift: np.ndarray

    @property
    def min_margin(self):
        """Smallest normalised Lemma-type margin ``S_k - c S_{k-1} H`` over nodes and k."""
        return float(np.nanmin(self.margin))


@dataclass
class PinchParams:
    """Functional parameters (all config-overridable).

    ``eps=None`` means ``1/(4n)``; ``D=None`` means the smallest grid value
    making the twice-perturbed margin nonnegative on the surface it is
    first evaluated on; ``alpha=None`` means 0 unless selected explicitly.
    """

    sigma: float = 0.1
    eta: float = 0.1
    eps: float | None = None
    D: float | None = None
    a: float = 1.0
    b: float = 1.0
    alpha: float | None = None
    k: int = 1
    g_D: float = 1.0


def frame_vectors(curve, field):
    """Ambient points, normals and tangent frames for every node."""
    x = curve.embed()
    nu = curve.embed_vectors(field.nu[:, 0], field.nu[:, 1])
    T = curve.embed_vectors(field.tangent[:, 0], field.tangent[:, 1])
    if curve.axisym:
        e2 = np.zeros_like(T)
        e2[:, 1] = 1.0
        frame = np.stack([T, e2], axis=1)
    else:
        frame = T[:, None, :]
    return x, nu, frame


def perturbed(curve, barrier, D0, field=None, tol=1e-9):
    """Perturbed second fundamental form at every node.

    Raises
    ------
    ConsistencyError
        If ``H_bar >= H + 1`` or ``|A_bar| >= 1`` fails at some node (the
        offending node is named).
    """
    field = fundamental_forms(curve) if field is None else field
    x, nu, frame = frame_vectors(curve, field)
    m, p = frame.shape[0], frame.shape[1]
    if barrier is None:
        T = np.zeros((m, p, p))
    else:
        T = barrier.perturbation_tensor(x, nu, frame)
    h = np.zeros((m, p, p))
    h[:, 0, 0] = field.lam1
    if p == 2:
        h[:, 1, 1] = field.lam2
    hbar = h + T + D0 * np.eye(p)[None]
    lam_bar = np.linalg.eigvalsh(hbar)
    H_bar = np.einsum("mii->m", hbar)
    A_bar = np.sqrt(np.einsum("mij,mij->m", hbar, hbar))
    scale = tol * np.maximum(1.0, np.abs(H_bar))
    bad = np.flatnonzero((H_bar < field.H + 1.0 - scale) | (A_bar < 1.0 - scale))
    if bad.size:
        i = int(bad[0])
        raise ConsistencyError(
            f"perturbed curvature invariant fails at node {i}: "
            f"H_bar={H_bar[i]:.6g}, H={field.H[i]:.6g}, |A_bar|={A_bar[i]:.6g}"
        )
    return PerturbedCurvature(hbar, T, lam_bar, H_bar, A_bar, float(D0))


def twice_perturbed(pert, H, eps, D):
    """Twice-perturbed curvature and the monitored lower bound on ``S_k``.

    ``margin[:, k-1]`` is ``(S_k - eps/(1+n eps) (n-k+1)/k S_{k-1} H_tilde)``
    divided by ``S_{k-1} H_tilde``; it is reported, not asserted.

    Raises
    ------
    PreconditionError
        Unless ``0 < eps <= 1/(2n)`` and ``D >= D0 + 1``.
    """
    n = pert.hbar.shape[1]
    if not 0.0 < eps <= 1.0 / (2 * n) + 1e-15:
        raise PreconditionError(f"eps={eps!r} outside (0, 1/(2n)]")
    if D < pert.D0 + 1.0 - 1e-12:
        raise PreconditionError(f"D={D!r} must be >= D0 + 1 = {pert.D0 + 1.0}")
    H = np.asarray(H, dtype=float)
    shift = eps * H + D - pert.D0
    lam_t = pert.lam_bar + shift[:, None]
    H_t = lam_t.sum(axis=1)
    A_t = np.sqrt((lam_t**2).sum(axis=1))
    S = elementary_symmetric_all(lam_t)
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(np.abs(S[:, :-1]) >= QUOTIENT_TOL * np.maximum(1.0, np.abs(S[:, 1:])),
                     S[:, 1:] / S[:, :-1], np.nan)
        margin = np.empty((lam_t.shape[0], n))
        for k in range(1, n + 1):
            c = eps / (1.0 + n * eps) * (n - k + 1) / k
            ref = S[:, k - 1] * H_t
            margin[:, k - 1] = (S[:, k] - c * ref) / np.abs(ref)
    return TwicePerturbedCurvature(lam_t, H_t, A_t, S, Q, margin, float(eps), float(D), shift)


def select_D(pert, H, eps, step=0.5, max_D=1e6):
    """Smallest ``D = D0 + 1 + j*step`` with a nonnegative twice-perturbed margin."""
    D = pert.D0 + 1.0
    while D <= max_D:
        tp = twice_perturbed(pert, H, eps, D)
        if tp.min_margin >= 0.0:
            return D
        D += step
    raise ConsistencyError("no D up to max_D makes the twice-perturbed margin nonnegative")


def phi_heat_defect(curve, barrier, b, field=None, h=1e-4):
    """``-tr_{T Sigma} D^2 phi / phi`` per node for ``phi = exp(-2 b d)``.

    Since ``(d/dt - Delta) phi = -alpha phi - tr_{T Sigma} D^2 phi``, the
    cut-off is a supersolution exactly when ``alpha`` exceeds the maximum of
    this quantity.
    """
    field = fundamental_forms(curve) if field is None else field
    x, _, frame = frame_vectors(curve, field)
    psi0 = np.exp(-2.0 * b * barrier.signed_distance(x))
    tr = np.zeros(x.shape[0])
    for j in range(frame.shape[1]):
        e = frame[:, j, :]
        pp = np.exp(-2.0 * b * barrier.signed_distance(x + h * e))
        pm = np.exp(-2.0 * b * barrier.signed_distance(x - h * e))
        tr += (pp - 2.0 * psi0 + pm) / (h * h)
    return -tr / psi0


def select_alpha(curves, barrier, b=1.0, grid_step=0.25):
    """Smallest ``alpha`` on a grid with ``(d/dt - Delta) phi < 0`` on all curves."""
    worst = -np.inf
    for c in curves:
        worst = max(worst, float(np.max(phi_heat_defect(c, barrier, b))))
    alpha = max(0.0, np.floor(worst / grid_step) * grid_step + grid_step)
    return float(alpha)


def umbilic_functional(lam, H, sigma):
    """Both forms of ``(|A|^2 - H^2/n)/H^(2-sigma)``; returns ``(f, f_alt)``."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[1]
    A2 = (lam**2).sum(axis=1)
    f = (A2 - H**2 / n) / H ** (2.0 - sigma)
    diffs = (lam[:, :, None] - lam[:, None, :]) ** 2
    f_alt = H**sigma / (2 * n) * diffs.sum(axis=(1, 2)) / H**2
    return f, f_alt


def pinch_functionals(curve, barrier, params=None, t=0.0, D0=None, field=None,
                      pert=None, identity_tol=1e-10):
    """Pinching functionals at every node of a snapshot.

    Returns a dict with per-node arrays (``*_nodes``) and maxima for
    ``ratio_AH = |A_bar|/H``, ``f_AH = (|A_bar| + a) phi / H``,
    ``f_convex = (-Q_{k+1} - eta H_tilde)/H_tilde^(1-sigma)``,
    ``f_umbilic``, ``g_gradient`` (sphere barriers), ``Z = H tr(A^3) - |A|^4``
    and ``min lam_i / H``.

    Raises
    ------
    MeanConvexityError
        If ``H <= 0`` at some node.
    PreconditionError
        If ``k + 1 > n`` for the convexity functional.
    ConsistencyError
        If the two forms of ``f_umbilic`` disagree.
    """
    p = params or PinchParams()
    field = fundamental_forms(curve) if field is None else field
    H = field.H
    if np.any(H <= 0):
        i = int(np.argmin(H))
        raise MeanConvexityError(f"H = {H[i]:.3e} <= 0 at node {i}")
    n = curve.n_dim
    if not 1 <= p.k <= n - 1 and n > 1:
        raise PreconditionError(f"convexity functional needs 1 <= k <= n-1, got k={p.k}")
    if D0 is None:
        D0 = barrier.calibrate_D0() if barrier is not None else 1.0
    pert = perturbed(curve, barrier, D0, field) if pert is None else pert
    lam = field.principal
    out = {}
    ratio = pert.A_bar / H
    out["ratio_AH_nodes"] = ratio
    out["ratio_AH"] = float(ratio.max())
    alpha = p.alpha or 0.0
    if barrier is not None:
        phi = barrier.cutoff_phi(curve.embed(), t, alpha, p.b)
    else:
        phi = np.full_like(H, np.exp(-alpha * t))
    f_ah = (pert.A_bar + p.a) * phi / H
    out["f_AH_nodes"] = f_ah
    out["f_AH"] = float(f_ah.max())
    f_u, f_u2 = umbilic_functional(lam, H, p.sigma)
    scale = (lam**2).sum(axis=1) / H ** (2.0 - p.sigma)
    if np.any(np.abs(f_u - f_u2) > identity_tol * scale + 1e-300):
        raise ConsistencyError("the two forms of the umbilic functional disagree")
    out["f_umbilic_nodes"] = f_u
    out["f_umbilic"] = float(f_u.max())
    if n > 1:
        eps = p.eps if p.eps is not None else 1.0 / (4 * n)
        D = p.D if p.D is not None else select_D(pert, H, eps)
        tp = twice_perturbed(pert, H, eps, D)
        Qk1 = tp.Q[:, p.k]
        if np.any(np.isnan(Qk1)):
            raise UndefinedQuotientError(f"Q_{p.k + 1} undefined at some node")
        f_c = (-Qk1 - p.eta * tp.H_tilde) / tp.H_tilde ** (1.0 - p.sigma)
        out["f_convex_nodes"] = f_c
        out["f_convex"] = float(f_c.max())
        out["lemma_margin"] = tp.min_margin
        out["D"] = D
        out["eps"] = eps
    A2 = (lam**2).sum(axis=1)
    Z = H * (lam**3).sum(axis=1) - A2**2
    out["Z_max"] = float(Z.max())
    out["Z_min"] = float(Z.min())
    out["min_lam_over_H"] = float((lam.min(axis=1) / H).min())
    if barrier is not None and barrier.kind == "sphere" and curve.axisym:
        g = g_gradient(curve, barrier, field, p)
        out["g_gradient_nodes"] = g
        out["g_gradient"] = float(g.max())
    out["D0"] = float(D0)
    out["alpha"] = float(alpha)
    return out


def gradient_H_minus_HV(curve, barrier, field=None):
    """``(H_s - H <V, T>)^2``, i.e. ``|grad H - H V|^2`` on a profile."""
    field = fundamental_forms(curve) if field is None else field
    Hs, _ = arclength_derivatives(curve, field.H)
    V = barrier.extension_field_V(curve.embed())
    T = curve.embed_vectors(field.tangent[:, 0], field.tangent[:, 1])
    VT = np.einsum("md,md->m", V, T)
    return (Hs - field.H * VT) ** 2


def g_gradient(curve, barrier, field, p):
    """``|grad H - HV|^2/H + bH(|A|^2 - H^2/n) + b a |A|^2 - eta H^3 + D``."""
    H = field.H
    n = curve.n_dim
    A2 = field.A_norm**2
    Q = gradient_H_minus_HV(curve, barrier, field)
    return Q / H + p.b * H * (A2 - H**2 / n) + p.b * p.a * A2 - p.eta * H**3 + p.g_D


def boundary_residuals(curve, field=None):
    """Residuals of the boundary identities at the (last) barrier end.

    Returns a dict with

    ``NH``
        ``|N H - k_nunu H| / H``
    ``NH_scaled``
        the same numerator over ``max(|k_nunu H|, |A|^2)``, which is
        invariant under parabolic rescaling (useful near a singularity)
    ``hNX``
        ``|h(N, X) + k(nu, X)| / |A|`` for the rotation direction ``X``
    ``lemma_ij`` / ``lemma_11``
        residuals of the two boundary-derivative formulas for ``grad_N h``
        (tangential-tangential and normal-normal components), over ``|A|^2``
    ``N_gradHV``
        ``|N |grad H - HV|^2| / (|A| (|grad H|^2 + H^4))`` (sphere barriers only)
    """
    field = fundamental_forms(curve) if field is None else field
    ends = curve.barrier_ends()
    if not ends:
        raise PreconditionError("curve has no barrier end")
    i = ends[-1]
    e = 0 if i == 0 else 1
    b = curve.barrier
    kappa = b.curvature_scalar()
    n = curve.n_dim
    lam1, lam2 = field.lam1, field.lam2
    H = field.H
    A = field.A_norm[i]
    # natural scales; a flat boundary (H = |A| = 0) reports absolute residuals
    A2scale = (A * A) or 1.0
    out = {"index": i}
    # k_{nu nu} for a unit vector nu tangent to S
    knn = kappa
    NH = conormal_derivative(curve, H, e)
    out["NH_value"] = NH
    out["H_boundary"] = float(H[i])
    out["NH"] = abs(NH - knn * H[i]) / (abs(H[i]) or A or 1.0)
    out["NH_scaled"] = abs(NH - knn * H[i]) / (max(abs(knn * H[i]), A * A) or 1.0)
    # mixed components vanish identically in the rotation-invariant frame
    x, nu, frame = frame_vectors(curve, field)
    hNX = 0.0  # off-diagonal entry of h in the (T, e_theta) frame
    k_ext = b.extension_shape(x[i])
    k_nuX = float(nu[i] @ k_ext @ frame[i, -1]) if n == 2 else 0.0
    out["hNX"] = abs(hNX + k_nuX) / (A or 1.0)
    if n == 2:
        K = n * kappa
        Nl1 = conormal_derivative(curve, lam1, e)
        Nl2 = conormal_derivative(curve, lam2, e)
        pred22 = lam2[i] * knn + lam1[i] * kappa - 2.0 * kappa * lam2[i]
        pred11 = 2.0 * (kappa * lam2[i] + lam1[i] * knn) - K * lam1[i]
        out["lemma_ij"] = abs(Nl2 - pred22) / A2scale
        out["lemma_11"] = abs(Nl1 - pred11) / A2scale
        if b.kind == "sphere":
            Q = gradient_H_minus_HV(curve, b, field)
            Hs, _ = arclength_derivatives(curve, H)
            NQ = conormal_derivative(curve, Q, e)
            scale = A * (Hs[i] ** 2 + H[i] ** 4) or 1.0
            out["N_gradHV"] = abs(NQ) / scale
    return out


def _time_weights(t):
    t0, t1, t2 = t
    a = t0 - t1
    c = t2 - t1
    w0 = -c / (a * (a - c))
    w2 = -a / (c * (c - a))
    return np.array([w0, -(w0 + w2), w2])


def grad_A_bar_sq(curve, diag, field=None):
    """``|grad A_bar|^2`` for a frame-diagonal form with entries ``diag[:, 0:2]``."""
    field = fundamental_forms(curve) if field is None else field
    d1s, _ = arclength_derivatives(curve, diag[:, 0])
    out = d1s**2
    if curve.axisym:
        d2s, _ = arclength_derivatives(curve, diag[:, 1])
        rs = field.tangent[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(curve.r > 0, rs / np.where(curve.r > 0, curve.r, 1.0), 0.0)
        out = out + d2s**2 + 2.0 * w**2 * (diag[:, 0] - diag[:, 1]) ** 2
    return out


def evolution_residuals(times, curves, barrier=None, D0=None, boundary_layer=None, axis_layer=3):
    """Residuals of the evolution equations from three material snapshots.

    Time derivatives are taken at the middle snapshot by three-point
    differences on the fixed node labels, and compared with right-hand
    sides evaluated there.  Exact equations: ``g11`` (``d g = -2 H h``),
    ``g22``, ``dV`` (``d dV = -H^2 dV``), ``H`` (``d H = Delta H + |A|^2 H``)
    and ``nu`` (``d nu = grad H``); each reported as max abs residual over
    interior nodes divided by the max abs right-hand side (for ``nu`` by
    ``max(|grad H|, |A|^2)``; ``*_abs`` keeps the unnormalised value).
    Interior excludes the end nodes, ``axis_layer`` further nodes next to an
    axis end (where the ``1/r`` terms have a non-vanishing local truncation
    error) and, for sphere barriers, a boundary layer of three nodes
    (``boundary_layer``).  With a barrier, the perturbed equations are
    reported as bounded ratios: ``Abar2_ratio`` =
    ``max |d|A_bar|^2 - Delta|A_bar|^2 - 2|A_bar|^4 + 2|grad A_bar|^2| / |A_bar|^3``
    and ``Hbar_ratio`` = ``max |dH - Delta H - |A_bar|^2 H| / (|A_bar| H)``.

    Raises
    ------
    PreconditionError
        If the snapshots do not share node labels (different node counts or
        a re-seeding between them, signalled by ``epochs``).
    """
    if len(curves) != 3 or len(times) != 3:
        raise PreconditionError("need exactly three snapshots")
    if isinstance(curves[0], tuple):
        epochs = [c[1] for c in curves]
        curves = [c[0] for c in curves]
        if len(set(epochs)) != 1:
            raise PreconditionError("re-seeding inside the window")
    if len({c.n_nodes for c in curves}) != 1:
        raise PreconditionError("snapshots have different node counts")
    times = np.asarray(times, dtype=float)
    if not np.all(np.diff(times) > 0):
        raise PreconditionError("times must be strictly increasing")
    w = _time_weights(times)
    fields = [fundamental_forms(c) for c in curves]
    mid = curves[1]
    fm = fields[1]
    n = mid.n_nodes
    lo, hi = 1, n - 1
    if mid.closed:
        lo, hi = 0, n
    elif boundary_layer is None and mid.barrier is not None and mid.barrier.kind == "sphere":
        hi = n - 4
    elif boundary_layer:
        hi = n - 1 - boundary_layer
    if not mid.closed and mid.end0 == "axis":
        lo = max(lo, 1 + axis_layer)
    sl = slice(lo, hi)

    def ddt(getter):
        return sum(wk * getter(fk, ck) for wk, fk, ck in zip(w, fields, curves))

    out = {}

    def put(name, lhs, rhs):
        res = np.abs(lhs - rhs)[sl]
        scale = np.max(np.abs(rhs[sl]))
        out[name + "_abs"] = float(res.max())
        out[name] = float(res.max() / scale) if scale > 0 else float(res.max())

    put("g11", ddt(lambda f, c: f.g11), -2.0 * fm.H * fm.h11)
    if mid.axisym:
        g22_sl = slice(max(lo, 1), hi) if mid.end0 == "axis" else sl
        lhs = ddt(lambda f, c: f.g22)
        rhs = -2.0 * fm.H * fm.h22
        res = np.abs(lhs - rhs)[g22_sl]
        scale = np.max(np.abs(rhs[g22_sl]))
        out["g22_abs"] = float(res.max())
        out["g22"] = float(res.max() / scale) if scale > 0 else float(res.max())
    put("dV", ddt(lambda f, c: f.dV), -fm.H**2 * fm.dV)
    put("H", ddt(lambda f, c: f.H), laplace_beltrami(mid, fm.H, fm) + fm.A_norm**2 * fm.H)
    Hs, _ = arclength_derivatives(mid, fm.H)
    nu_t = ddt(lambda f, c: f.nu)
    grad = Hs[:, None] * fm.tangent
    res = np.linalg.norm(nu_t - grad, axis=1)[sl]
    # |grad H| vanishes on umbilic oracles; |A|^2 has the same dimension
    scale = max(np.max(np.linalg.norm(grad, axis=1)[sl]), np.max(fm.A_norm[sl] ** 2))
    out["nu_abs"] = float(res.max())
    out["nu"] = float(res.max() / scale) if scale > 0 else float(res.max())
    if barrier is not None:
        D0 = barrier.calibrate_D0() if D0 is None else D0
        perts = [perturbed(c, barrier, D0, f) for c, f in zip(curves, fields)]
        pm = perts[1]
        A2 = pm.A_bar**2
        dA2 = sum(wk * p.A_bar**2 for wk, p in zip(w, perts))
        lap = laplace_beltrami(mid, A2, fm)
        gA = grad_A_bar_sq(mid, pm.diag, fm)
        r1 = np.abs(dA2 - lap - 2.0 * A2**2 + 2.0 * gA) / pm.A_bar**3
        out["Abar2_ratio"] = float(r1[sl].max())
        dH = ddt(lambda f, c: f.H)
        r2 = np.abs(dH - laplace_beltrami(mid, fm.H, fm) - A2 * fm.H)
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = r2 / (pm.A_bar * np.abs(fm.H))
        r2 = r2[sl]
        out["Hbar_ratio"] = float(np.nanmax(r2)) if np.any(np.isfinite(r2)) else 0.0
    return out


def gradient_term_check(curve, diag, field=None):
    """Empirical constant of the gradient-term inequality for ``|A_bar| > 2 H_bar``.

    ``diag`` holds the frame-diagonal entries of a perturbed form (for
    example :attr:`PerturbedCurvature.diag`).  Returns per-node
    ``ratio = (|grad A_bar|^2 - |grad |A_bar||^2) / |grad A_bar|^2`` (``nan``
    where not applicable: ``|A_bar| <= 2 H_bar`` or ``|grad A_bar| = 0``),
    the additive scale ``|A_bar|^2``, the applicability mask and the minimum
    ratio over applicable nodes (``nan`` if none).
    """
    field = fundamental_forms(curve) if field is None else field
    diag = np.asarray(diag, dtype=float)
    A = np.sqrt((diag**2).sum(axis=1))
    Hb = diag.sum(axis=1)
    gA = grad_A_bar_sq(curve, diag, field)
    As, _ = arclength_derivatives(curve, A)
    applicable = (A > 2.0 * Hb) & (gA > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(applicable, (gA - As**2) / gA, np.nan)
    min_ratio = float(np.nanmin(ratio)) if applicable.any() else float("nan")
    return {"ratio": ratio, "scale": A**2, "applicable": applicable, "min_ratio": min_ratio}


PINCH_KEYS = ("ratio_AH", "f_AH", "f_umbilic", "f_convex", "g_gradient", "Z_max",
              "min_lam_over_H", "lemma_margin")


def pinch_series(traj, barrier=None, params=None, D0=None):
    """Pinching functionals over every snapshot of a trajectory.

    The twice-perturbed shift ``D`` is selected once on the first snapshot
    (if not given) and then held fixed.  Returns a dict of arrays keyed by
    ``t`` and :data:`PINCH_KEYS` (missing functionals are ``nan``).
    """
    p = PinchParams(**vars(params)) if params is not None else PinchParams()
    snaps = traj.snapshots
    barrier = snaps[0].curve.barrier if barrier is None else barrier
    if D0 is None:
        D0 = barrier.calibrate_D0() if barrier is not None else 1.0
    rows = {k: [] for k in ("t",) + PINCH_KEYS}
    for s in snaps:
        pf = pinch_functionals(s.curve, barrier, p, t=s.t, D0=D0)
        if p.D is None and "D" in pf:
            p.D = pf["D"]
        rows["t"].append(s.t)
        for k in PINCH_KEYS:
            rows[k].append(pf.get(k, np.nan))
    out = {k: np.asarray(v, dtype=float) for k, v in rows.items()}
    out["D"] = p.D
    out["D0"] = float(D0)
    return out


def fit_exponential_rate(t, values):
    """Least-squares fit ``log v = log C + alpha t``; returns ``(alpha, C, R^2)``.

    ``R^2`` is ``nan`` when the data have no variance (a constant series is
    fitted exactly with ``alpha = 0``).
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 2 or not np.all(np.isfinite(v) & (v > 0)):
        raise PreconditionError("need at least two positive finite values")
    y = np.log(v)
    A = np.vstack([t, np.ones_like(t)]).T
    (alpha, logC), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (alpha * t + logC)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 1e-28 else float("nan")
    return float(alpha), float(np.exp(logC)), r2
