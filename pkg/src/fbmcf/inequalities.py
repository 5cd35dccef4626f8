"""Empirical checks of integral inequalities on discrete surfaces and flows.

Ratios of the two sides of trace and Sobolev-type inequalities are
evaluated over a family of test functions (their supremum estimates the
constant), and the two ``(star)`` inequalities behind the Stampacchia
iteration are monitored along simulated trajectories with constants fitted
at ``t = 0`` and then frozen.
"""

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import umbilic_functional
from .exceptions import DegenerateInputError, PreconditionError
from .geometry import (
    arclength,
    arclength_derivatives,
    boundary_frame,
    fundamental_forms,
    integrate_boundary,
    integrate_bulk,
    node_weights,
)

__all__ = [
    "TestFunctionFamily",
    "trace_ratio",
    "sobolev_ratio",
    "family_sup",
    "area_monotonicity",
    "StampacchiaConfig",
    "star_integrals",
    "level_set_measures",
    "fit_stampacchia",
    "holder_check",
    "star_monitor",
]


# -- test functions ----------------------------------------------------------

@dataclass
class TestFunctionFamily:
    """Smooth test functions of normalised arclength ``u`` in ``[0, 1]``.

    ``u = 0`` is the first node (the axis for axisymmetric profiles).  All
    generators are even in ``u`` at ``u = 0`` so that they are ``C^1`` on
    the surface of revolution.  The default family has 50 members:
    polynomials, bumps, oscillatory modes and curvature-derived shapes.
    """

    __test__ = False  # not a pytest class

    poly_degrees: tuple = (0, 2, 4, 6, 8, 10, 12)
    one_minus_powers: tuple = (1, 2, 3, 4)
    bump_centres: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    bump_widths: tuple = (0.2, 0.4, 0.8)
    cos_modes: tuple = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    shifted_cos_modes: tuple = (1, 2, 3, 4, 5, 6)
    h_powers: tuple = (0.1, 0.25, 0.5, 1.0, 1.5, 2.0)
    h_poly: tuple = (2, 4)

    def names(self):
        out = [f"poly_u^{d}" for d in self.poly_degrees]
        out += [f"poly_(1-u^2)^{m}" for m in self.one_minus_powers]
        out += [f"bump_c{c}_w{w}" for c in self.bump_centres for w in self.bump_widths]
        out += [f"osc_cos{m}" for m in self.cos_modes]
        out += [f"osc_2+cos{m}" for m in self.shifted_cos_modes]
        out += [f"curv_H^{s}" for s in self.h_powers]
        out += [f"curv_H*u^{d}" for d in self.h_poly]
        return out

    def __len__(self):
        return len(self.names())

    def evaluate(self, curve, fld=None):
        """List of ``(name, values)`` on the nodes of ``curve``."""
        fld = fundamental_forms(curve) if fld is None else fld
        s = arclength(curve)
        u = s / s[-1]
        out = []
        for d in self.poly_degrees:
            out.append(u**d)
        for m in self.one_minus_powers:
            out.append((1.0 - u**2) ** m)
        for c in self.bump_centres:
            for w in self.bump_widths:
                # sum of mirrored Gaussians keeps the function even at u = 0
                out.append(np.exp(-((u - c) / w) ** 2) + np.exp(-((u + c) / w) ** 2))
        for m in self.cos_modes:
            out.append(np.cos(m * np.pi * u))
        for m in self.shifted_cos_modes:
            out.append(2.0 + np.cos(m * np.pi * u))
        Hp = np.abs(fld.H)
        for sgm in self.h_powers:
            out.append(Hp**sgm)
        for d in self.h_poly:
            out.append(Hp * u**d)
        return list(zip(self.names(), out))


def _grad_norm(curve, v):
    vs, _ = arclength_derivatives(curve, v)
    return np.abs(vs)


def _check_orthogonal(curve, tol):
    ends = curve.barrier_ends()
    if not ends:
        raise PreconditionError("surface has no boundary on a barrier")
    for i in ends:
        d = boundary_frame(curve, 0 if i == 0 else 1).defect
        if d > tol:
            raise PreconditionError(f"boundary is not orthogonal to the barrier (defect {d:.2e})")


def trace_ratio(curve, v, fld=None, defect_tol=1e-6):
    """``int_{bdry}|v| / (int|grad v| + int|H v| + int|v|)``.

    Raises
    ------
    PreconditionError
        If the surface does not meet the barrier orthogonally.
    DegenerateInputError
        If the denominator vanishes (for example ``v = 0``).
    """
    _check_orthogonal(curve, defect_tol)
    fld = fundamental_forms(curve) if fld is None else fld
    v = np.asarray(v, dtype=float)
    av = np.abs(v)
    den = (integrate_bulk(curve, _grad_norm(curve, v)) + integrate_bulk(curve, np.abs(fld.H) * av)
           + integrate_bulk(curve, av))
    if not den > 0:
        raise DegenerateInputError("test function has vanishing norms")
    return integrate_boundary(curve, av) / den


def _norm(curve, f, p):
    return integrate_bulk(curve, np.abs(f) ** p) ** (1.0 / p)


def sobolev_ratio(curve, v, p=1.0, mode="thm23", q=2.0, fld=None):
    """Ratio of the two sides of a Michael-Simon type inequality.

    ``mode="thm23"``: ``||v||_{np/(n-p)} / (||grad v||_p + ||Hv||_p + ||v||_p)``
    with ``1 <= p < n``.  ``mode="cor24"`` (``n = 2``):
    ``||v||_{2q} / (|Sigma|^{1/2q} (||grad v||_2 + ||Hv||_2 + ||v||_2))``.

    Raises
    ------
    PreconditionError
        For ``p >= n`` in ``thm23`` mode, ``n != 2`` in ``cor24`` mode, or
        ``q < 1``.
    DegenerateInputError
        If the right-hand side vanishes.
    """
    fld = fundamental_forms(curve) if fld is None else fld
    n = curve.n_dim
    v = np.asarray(v, dtype=float)
    g = _grad_norm(curve, v)
    Hv = fld.H * v
    if mode == "thm23":
        if not 1.0 <= p < n:
            raise PreconditionError(f"need 1 <= p < n = {n}, got p={p}")
        lhs = _norm(curve, v, n * p / (n - p))
        rhs = _norm(curve, g, p) + _norm(curve, Hv, p) + _norm(curve, v, p)
    elif mode == "cor24":
        if n != 2:
            raise PreconditionError("the q-form needs n = 2")
        if q < 1.0:
            raise PreconditionError("q must be >= 1")
        area = integrate_bulk(curve, np.ones_like(v))
        lhs = _norm(curve, v, 2.0 * q)
        rhs = area ** (1.0 / (2.0 * q)) * (_norm(curve, g, 2) + _norm(curve, Hv, 2) + _norm(curve, v, 2))
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    if not rhs > 0:
        raise DegenerateInputError("test function has vanishing norms")
    return lhs / rhs


def family_sup(curve, ratio, family=None, **kwargs):
    """Supremum of ``ratio(curve, v, **kwargs)`` over a test-function family.

    Members with vanishing norms on this surface are skipped.  Returns
    ``(sup, argmax_name, {name: value})``.
    """
    family = family or TestFunctionFamily()
    fld = fundamental_forms(curve)
    vals = {}
    for name, v in family.evaluate(curve, fld):
        try:
            vals[name] = ratio(curve, v, fld=fld, **kwargs)
        except DegenerateInputError:
            continue  # e.g. curvature-derived members on a flat surface
    if not vals:
        raise DegenerateInputError("every member of the family is degenerate here")
    name = max(vals, key=vals.get)
    return vals[name], name, vals


# -- area ----------------------------------------------------------------------

def area_monotonicity(traj, tol=1e-10):
    """Area law along a trajectory.

    Returns a dict with the snapshot times and areas, the per-interior-time
    residual ``|d|Sigma|/dt + int H^2| / int H^2`` (three-point differences,
    ``nan`` where ``int H^2 = 0``), ``max_increase`` (largest relative area
    increase between snapshots) and ``monotone`` (``max_increase <= tol``).
    """
    snaps = traj.snapshots
    if len(snaps) < 3:
        raise PreconditionError("need at least three snapshots")
    t = np.array([s.t for s in snaps])
    A = np.empty(t.size)
    IH2 = np.empty(t.size)
    for j, s in enumerate(snaps):
        fld = fundamental_forms(s.curve)
        A[j] = integrate_bulk(s.curve, np.ones(s.curve.n_nodes))
        IH2[j] = integrate_bulk(s.curve, fld.H**2)
    res = np.full(t.size - 2, np.nan)
    absres = np.empty(t.size - 2)
    for j in range(1, t.size - 1):
        dA = _three_point(t[j - 1:j + 2], A[j - 1:j + 2])
        absres[j - 1] = abs(dA + IH2[j])
        if IH2[j] > 0:
            res[j - 1] = absres[j - 1] / IH2[j]
    incr = np.diff(A) / np.maximum(np.abs(A[:-1]), 1e-300)
    max_increase = float(max(incr.max(), 0.0))
    return {"t": t, "area": A, "int_H2": IH2, "residual": res, "residual_abs": absres,
            "max_increase": max_increase, "monotone": max_increase <= tol}


# -- Stampacchia side --------------------------------------------------------

@dataclass
class StampacchiaConfig:
    """Parameters of the ``(star)`` monitor.

    ``sigma=None`` selects ``0.5 p^{-1/2}``.  ``functional`` is ``umbilic``
    (``H_tilde = H``, ``G_tilde = |grad H|``).  ``k_levels`` log-spaced
    thresholds span ``[k0_frac * max f, max f]``; ``evolution_levels`` are
    the thresholds (as fractions of ``max f`` at ``t = 0``) at which the
    evolution inequality is monitored.
    """

    p: float = 20.0
    sigma: float | None = None
    beta: float = 1.0
    functional: str = "umbilic"
    k_levels: int = 20
    k0_frac: float = 1e-3
    evolution_levels: tuple = (0.0,)
    holder_pairs: tuple = ((1.0, 1.0), (2.0, 0.5), (10.0, 1.5))
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma is None:
            self.sigma = 0.5 / np.sqrt(self.p)
        if not self.p > 4:
            raise PreconditionError("p must exceed 4")
        if not self.sigma < 0.5:
            raise PreconditionError("sigma must be < 1/2")
        if not self.beta > 0:
            raise PreconditionError("beta must be positive")
        if self.functional != "umbilic":
            raise PreconditionError(f"unsupported functional {self.functional!r}")
        if self.k_levels < 2:
            raise PreconditionError("need at least two k levels")


def _functional(curve, cfg):
    fld = fundamental_forms(curve)
    if np.any(fld.H <= 0):
        raise PreconditionError("the umbilic functional needs H > 0")
    f, _ = umbilic_functional(fld.principal, fld.H, cfg.sigma)
    f = np.maximum(f, 0.0)  # remove round-off negatives of a nonnegative quantity
    Hs, _ = arclength_derivatives(curve, fld.H)
    return f, fld.H, np.abs(Hs)


def star_integrals(curve, cfg, k=0.0):
    """All integrals appearing in the two ``(star)`` inequalities at level ``k``."""
    f, Ht, Gt = _functional(curve, cfg)
    p, sg = cfg.p, cfg.sigma
    fk = np.maximum(f - k, 0.0)
    chi = (f >= k).astype(float)
    fs, _ = arclength_derivatives(curve, f)
    grad2 = fs**2
    I = lambda g: integrate_bulk(curve, g)  # noqa: E731
    with np.errstate(divide="ignore", invalid="ignore"):
        fkm2 = np.where(fk > 0, fk ** (p - 2), 0.0)
        fm2 = np.where(f > 0, f ** (p - 2), 0.0)
    G2 = Gt**2 / Ht ** (2.0 - sg)
    return {
        "f_max": float(f.max()),
        "fp_H2": I(f**p * Ht**2),
        "fp2_grad2": I(fm2 * grad2),
        "G2_fp1": I(G2 * f ** (p - 1)),
        "fp": I(f**p),
        "bdry_fp1_Hs": integrate_boundary(curve, f ** (p - 1) * Ht**sg),
        "fkp": I(fk**p),
        "fkp2_grad2": I(fkm2 * grad2),
        "G2_fkp1": I(G2 * fk ** (p - 1)),
        "Ak_H2_fp": I(chi * Ht**2 * f**p),
        "fkp_H2": I(Ht**2 * fk**p),
        "Ak_fp": I(chi * f**p),
        "Ak": I(chi),
        "bdry_fkp1_Hs": integrate_boundary(curve, fk ** (p - 1) * Ht**sg),
    }


def _poincare_sides(J, cfg):
    p, b = cfg.p, cfg.beta
    rhs = ((p + p / b) * J["fp2_grad2"] + (1.0 + b * p) * J["G2_fp1"] + J["fp"]
           + J["bdry_fp1_Hs"])
    return J["fp_H2"], rhs


def _evolution_parts(J, cfg):
    """Right side of the evolution inequality as ``base + (1/c)*a + c*b + C*d``."""
    p, sg = cfg.p, cfg.sigma
    base = -(p * p / 3.0) * J["fkp2_grad2"] - 0.2 * J["fkp_H2"]
    inv_c = -p * J["G2_fkp1"]
    lin_c = p * sg * J["Ak_H2_fp"] + p * J["bdry_fkp1_Hs"]
    lin_C = J["Ak_fp"] + J["Ak"]
    return base, inv_c, lin_c, lin_C


def _three_point(t, F):
    a = t[0] - t[1]
    c = t[2] - t[1]
    w0 = -c / (a * (a - c))
    w2 = -a / (c * (c - a))
    return w0 * F[0] - (w0 + w2) * F[1] + w2 * F[2]


def level_set_measures(times, fields, weights, levels):
    """Spacetime measures ``|A(k)| = int_0^T |{f >= k}| dt`` on a level grid.

    ``fields[j]`` and ``weights[j]`` are nodal values and quadrature weights
    at ``times[j]``; time integration is trapezoidal.  Nesting
    ``|A(l)| <= |A(k)|`` for ``l > k`` holds exactly.
    """
    levels = np.asarray(levels, dtype=float)
    per_t = np.array([[np.sum(w[f >= k]) for k in levels] for f, w in zip(fields, weights)])
    dt = np.diff(np.asarray(times, dtype=float))
    if dt.size == 0:
        return per_t[0] * 0.0
    return np.sum(0.5 * (per_t[1:] + per_t[:-1]) * dt[:, None], axis=0)


def fit_stampacchia(levels, measures):
    """Fit ``|l-k|^beta |A(l)| <= C |A(k)|^alpha`` over all level pairs.

    ``log|A(l)| = log C + alpha log|A(k)| - beta log(l-k)`` is fitted by
    least squares over pairs ``l > k`` with positive measures; ``C`` is then
    raised to the envelope so the inequality holds on every pair.  Returns
    a dict with ``alpha``, ``beta``, ``C``, ``n_pairs`` and the standard
    error of ``alpha`` (``alpha_se``).
    """
    levels = np.asarray(levels, dtype=float)
    m = np.asarray(measures, dtype=float)
    rows, y = [], []
    for i in range(levels.size):
        for j in range(i + 1, levels.size):
            if m[i] > 0 and m[j] > 0:
                rows.append([1.0, np.log(m[i]), -np.log(levels[j] - levels[i])])
                y.append(np.log(m[j]))
    if len(rows) < 4:
        raise PreconditionError("too few nonempty level pairs for the fit")
    X = np.array(rows)
    y = np.array(y)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    logC, alpha, beta = coef
    resid = y - X @ coef
    dof = max(len(y) - 3, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(X.T @ X)
    env = float(np.max(resid))
    return {"alpha": float(alpha), "beta": float(beta), "C": float(np.exp(logC + env)),
            "n_pairs": len(y), "alpha_se": float(np.sqrt(max(cov[1, 1], 0.0)))}


def holder_check(curve, f, Ht, pairs, p, rng_weights=None):
    """Worst relative violation of ``int f^q H^r <= (int f^p H^{rp/q})^{q/p} |spt f|^{1-q/p}``.

    Hoelder's inequality holds exactly for positive quadrature weights, so
    this is a self-check of the integration code; returns ``max(lhs/rhs) - 1``
    over ``pairs = ((q, r), ...)`` with ``q < p`` (``-1`` when ``f = 0``).
    """
    w = node_weights(curve)
    spt = float(np.sum(w[f > 0]))
    # both sides are homogeneous in f and H; normalising avoids underflow
    fmax = float(np.max(f))
    hmax = float(np.max(np.abs(Ht)))
    if fmax <= 0 or hmax <= 0:
        return -1.0
    f = f / fmax
    Ht = Ht / hmax
    worst = -1.0
    for q, r in pairs:
        if not 0 < q < p:
            continue
        lhs = float(np.sum(w * f**q * Ht**r))
        rhs = float(np.sum(w * f**p * Ht ** (r * p / q))) ** (q / p) * spt ** (1.0 - q / p)
        if rhs > 0:
            worst = max(worst, lhs / rhs - 1.0)
    return worst


def star_monitor(traj, cfg=None):
    """Monitor the two ``(star)`` inequalities and the level-set decay.

    ``c`` is the smallest constant making the Poincare-type inequality hold
    on the first snapshot.  For the evolution-type inequality the ``c``
    (``c_evolution``) is the value maximising its right side at the first
    interior time and ``C`` the smallest making it hold there.  All are
    then frozen.  Margins are ``(rhs - lhs)`` normalised by the sum of the
    absolute values of the terms; nonnegative means the frozen constant
    still works.  The time derivative of ``int f_k^p`` uses three-point
    differences on the snapshot times.
    """
    cfg = cfg or StampacchiaConfig()
    snaps = traj.snapshots
    if len(snaps) < 3:
        raise PreconditionError("need at least three snapshots")
    t = np.array([s.t for s in snaps])
    fs, ws = [], []
    J0 = []
    for s in snaps:
        f, _, _ = _functional(s.curve, cfg)
        fs.append(f)
        ws.append(node_weights(s.curve))
        J0.append(star_integrals(s.curve, cfg, 0.0))
    # Poincare-type inequality with c frozen at t = 0
    L0, R0 = _poincare_sides(J0[0], cfg)
    c = L0 / R0 if R0 > 0 else 0.0
    poincare = np.full(t.size, np.nan)
    if c > 0:
        for j, J in enumerate(J0):
            L, R = _poincare_sides(J, cfg)
            scale = L / c + R
            poincare[j] = (R - L / c) / scale if scale > 0 else 0.0
    # evolution-type inequality: (c_e, C) fitted at the first interior time
    f_max0 = float(fs[0].max())
    evo = {}
    C_fit = {}
    c_evo = {}
    for frac in cfg.evolution_levels:
        k = frac * f_max0
        Jk = [J0[j] if k == 0.0 else star_integrals(s.curve, cfg, k) for j, s in enumerate(snaps)]
        F = np.array([J["fkp"] for J in Jk])
        marg = np.full(t.size, np.nan)
        ce = Cval = None
        for j in range(1, t.size - 1):
            dF = _three_point(t[j - 1:j + 2], F[j - 1:j + 2])
            base, inv_c, lin_c, lin_C = _evolution_parts(Jk[j], cfg)
            if ce is None:
                # the c maximising -a/c + c*b, then the smallest admissible C
                ce = np.sqrt(-inv_c / lin_c) if inv_c < 0 and lin_c > 0 else 1.0
                need = dF - (base + inv_c / ce + ce * lin_c)
                Cval = max(need / lin_C, 0.0) if lin_C > 0 else 0.0
            terms = (base, inv_c / ce, ce * lin_c, Cval * lin_C)
            rhs = sum(terms)
            scale = abs(dF) + sum(abs(x) for x in terms)
            marg[j] = (rhs - dF) / scale if scale > 0 else 0.0
        evo[frac] = marg
        C_fit[frac] = 0.0 if Cval is None else float(Cval)
        c_evo[frac] = 1.0 if ce is None else float(ce)
    # level-set measures and the tail fit
    f_max = max(float(f.max()) for f in fs)
    out = {"t": t, "c": float(c), "C": C_fit, "c_evolution": c_evo, "poincare_margin": poincare,
           "evolution_margin": evo, "f_max": f_max, "p": cfg.p, "sigma": cfg.sigma}
    if f_max > 0:
        levels = np.geomspace(cfg.k0_frac * f_max, f_max, cfg.k_levels)
        meas = level_set_measures(t, fs, ws, levels)
        out["levels"] = levels
        out["measures"] = meas
        out["nested"] = bool(np.all(np.diff(meas) <= 0.0))
        try:
            out["fit"] = fit_stampacchia(levels, meas)
        except PreconditionError:
            out["fit"] = None
    else:
        out["levels"] = np.array([0.0])
        out["measures"] = np.array([0.0])
        out["nested"] = True
        out["fit"] = None
    out["holder"] = max(
        holder_check(s.curve, f, fundamental_forms(s.curve).H, cfg.holder_pairs, cfg.p)
        for s, f in zip(snaps, fs)
    )
    return out
