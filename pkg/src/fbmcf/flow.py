"""Mean curvature flow with free boundary: stepping, runs, blow-up analysis.

Nodes move with the normal velocity ``-H nu`` by an explicit Heun (RK2)
or Euler scheme with ``dt = c_cfl * min(h_min^2, 1/max|A|^2)``.  After
every stage the end conditions are re-imposed: axis nodes stay on the
axis, plane-barrier nodes are projected onto the plane (the reflected
ghost node makes the contact exactly orthogonal), and sphere-barrier nodes
are placed on the sphere where the one-sided tangent is radial.

The stepping loop itself is compiled (:mod:`fbmcf._kernels`); this module
adds redistribution, refinement, snapshots and termination handling.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .exceptions import (
    ConsistencyError,
    GeometryError,
    MeanConvexityError,
    PreconditionError,
    StepSizeError,
)
from .geometry import (
    ProfileCurve,
    area,
    boundary_frame,
    fundamental_forms,
    integrate_bulk,
    redistribute,
    self_intersects,
)

__all__ = [
    "FlowConfig",
    "Snapshot",
    "FlowTrajectory",
    "step",
    "cfl_limit",
    "run",
    "material_window",
    "detect_blowup",
    "rescale_at_singularity",
    "blowup_point",
]


@dataclass
class FlowConfig:
    """Time-stepping, mesh-control and recording parameters."""

    c_cfl: float = 0.2
    dt: float | None = None
    dt_min: float = 1e-14
    scheme: str = "rk2"
    blowup_threshold: float = 1e3
    max_time: float = 10.0
    max_steps: int = 100_000_000
    redistribute_ratio: float = 2.0
    min_nodes_per_radius: float = 40.0
    max_nodes: int = 2048
    snapshot_dt: float = 0.01
    snapshot_growth: float = 1.1
    chunk_steps: int = 400
    steady_tol: float = 1e-12
    defect_tol: float = 1e-4
    window_every: int = 0
    check_intersections: bool = True

    def __post_init__(self):
        if not 0.0 < self.c_cfl <= 0.5:
            raise PreconditionError("c_cfl must lie in (0, 0.5]")
        if self.scheme not in ("rk2", "euler"):
            raise PreconditionError("scheme must be 'rk2' or 'euler'")
        if self.dt is not None and not self.dt > 0:
            raise PreconditionError("fixed dt must be positive")
        if not 1.0 < self.redistribute_ratio <= 3.0:
            raise PreconditionError("redistribute_ratio must lie in (1, 3]")
        if self.blowup_threshold <= 0 or self.max_time <= 0:
            raise PreconditionError("blowup_threshold and max_time must be positive")
        if self.snapshot_dt <= 0 or self.snapshot_growth <= 1.0:
            raise PreconditionError("snapshot_dt > 0 and snapshot_growth > 1 required")
        if self.chunk_steps < 1 or self.max_steps < 1:
            raise PreconditionError("chunk_steps and max_steps must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class Snapshot:
    """A recorded state; ``epoch`` changes whenever nodes are re-seeded."""

    t: float
    curve: ProfileCurve
    step: int
    epoch: int


@dataclass
class FlowTrajectory:
    """Snapshots, per-chunk records, material windows and termination."""

    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    termination: dict = field(default_factory=dict)
    config: FlowConfig | None = None

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    def record_array(self, key):
        return np.array([rec[key] for rec in self.records])


def cfl_limit(curve, c_cfl, field=None):
    """Largest stable explicit step ``c_cfl * min(h_min^2, 1/max|A|^2)``."""
    field = fundamental_forms(curve) if field is None else field
    h = curve.segment_lengths().min()
    a2 = float(np.max(field.A_norm**2))
    lim = h * h
    if a2 > 0:
        lim = min(lim, 1.0 / a2)
    return c_cfl * lim


def _advance(curve, r, z, t, t_end, max_steps, cfg, dt_fixed=0.0, ratio_max=None,
             blowup=None, require_mc=True, steady_tol=None):
    e0, e1 = curve.end_codes
    return K.advance(
        r, z, t, t_end, max_steps, curve.axisym, curve.closed, e0, e1,
        curve.barrier_code, curve.barrier_params(), curve.orientation,
        cfg.c_cfl, dt_fixed, cfg.dt_min,
        cfg.blowup_threshold if blowup is None else blowup,
        cfg.redistribute_ratio if ratio_max is None else ratio_max,
        cfg.steady_tol if steady_tol is None else steady_tol,
        cfg.scheme == "rk2", require_mc,
    )


def _check_ends(curve):
    if curve.closed:
        return
    for kind in (curve.end0, curve.end1):
        if kind == "free":
            raise PreconditionError("the flow needs axis or barrier ends (or a closed curve)")


def step(curve, t, dt, config=None):
    """One explicit step of size ``dt``; returns the new curve.

    Raises
    ------
    StepSizeError
        If ``dt`` exceeds ``c_cfl * min(h_min^2, 1/max|A|^2)``.
    PreconditionError
        If the orthogonality defect exceeds ``config.defect_tol``.
    """
    cfg = config or FlowConfig()
    _check_ends(curve)
    for i in curve.barrier_ends():
        d = boundary_frame(curve, 0 if i == 0 else 1).defect
        if d > cfg.defect_tol:
            raise PreconditionError(f"orthogonality defect {d:.3e} exceeds tolerance")
    r, z = curve.r.copy(), curve.z.copy()
    st, *_ = _advance(curve, r, z, t, t + dt, 1, cfg, dt_fixed=dt, ratio_max=np.inf,
                      blowup=np.inf, require_mc=False, steady_tol=-1.0)
    if st == K.ST_CFL:
        raise StepSizeError(f"dt={dt:.3e} exceeds the CFL bound {cfl_limit(curve, cfg.c_cfl):.3e}")
    out = curve.with_nodes(r, z)
    return out


def material_window(curve, t, config=None, dt=None, interval=None):
    """Three states ``t, t+d, t+2d`` on the same nodes (no re-seeding).

    Used for evolution-equation residuals.  By default ``d`` is a single
    step of half the CFL size (or ``dt``).  With ``interval`` each of the two
    gaps is covered by CFL-limited sub-steps instead; a gap proportional to
    the mesh size keeps round-off in the time difference below the spatial
    truncation error on fine meshes.  Returns ``(times, curves)``.
    """
    cfg = config or FlowConfig()
    if interval is None:
        dt = 0.5 * cfl_limit(curve, cfg.c_cfl) if dt is None else dt
        c1 = step(curve, t, dt, cfg)
        c2 = step(c1, t + dt, dt, cfg)
        return np.array([t, t + dt, t + 2 * dt]), [curve, c1, c2]
    if not interval > 0:
        raise PreconditionError("interval must be positive")
    _check_ends(curve)
    curves = [curve]
    r, z = curve.r.copy(), curve.z.copy()
    tt = t
    for _ in range(2):
        st, tt, *_ = _advance(curve, r, z, tt, tt + interval, 10**9, cfg, ratio_max=np.inf,
                              blowup=np.inf, require_mc=False, steady_tol=-1.0)
        if st == K.ST_DT_FLOOR:
            raise StepSizeError("time step fell below dt_min inside a material window")
        curves.append(curve.with_nodes(r.copy(), z.copy()))
    return np.array([t, t + interval, t + 2 * interval]), curves


def _needs_refinement(curve, field, cfg):
    if curve.n_nodes * 2 > cfg.max_nodes:
        return False
    lam = np.maximum(np.abs(field.lam1), np.abs(field.lam2))
    i = int(np.argmax(lam))
    if lam[i] == 0:
        return False
    seg = curve.segment_lengths()
    if curve.closed:
        h = 0.5 * (seg[i] + seg[i - 1])
    else:
        h = 0.5 * (seg[min(i, seg.size - 1)] + seg[max(i - 1, 0)])
    return 1.0 / (lam[i] * h) < cfg.min_nodes_per_radius


def _record(curve, t, steps, dt, epoch, field, event=""):
    defect = 0.0
    for i in curve.barrier_ends():
        defect = max(defect, boundary_frame(curve, 0 if i == 0 else 1).defect)
    return {
        "step": int(steps), "t": float(t), "dt": float(dt), "n_nodes": curve.n_nodes,
        "epoch": int(epoch), "max_A": float(field.A_norm.max()), "min_H": float(field.H.min()),
        "max_H": float(field.H.max()), "area": area(curve),
        "int_H2": integrate_bulk(curve, field.H**2), "defect": float(defect), "event": event,
    }


def run(config, initial):
    """Evolve ``initial`` until blow-up, steady state, ``max_time`` or error.

    The initial curve has its end conditions imposed first (projection at
    ``t = 0``).  Mean-convexity is monitored: a negative ``H`` raises
    :class:`MeanConvexityError` (with the partial trajectory attached as
    ``exc.trajectory``) instead of being clipped.

    Returns
    -------
    FlowTrajectory
        ``termination["kind"]`` is one of ``blowup``, ``steady``,
        ``max_time``, ``max_steps``.
    """
    cfg = config
    _check_ends(initial)
    r, z = initial.r.copy(), initial.z.copy()
    e0, e1 = initial.end_codes
    K.enforce_ends(r, z, initial.closed, e0, e1, initial.barrier_code, initial.barrier_params())
    curve = initial.with_nodes(r, z)
    traj = FlowTrajectory(config=cfg)
    t = 0.0
    steps = 0
    epoch = 0
    field = fundamental_forms(curve)
    scale = max(1.0, float(field.A_norm.max()))
    if field.H.min() < -1e-8 * scale:
        raise MeanConvexityError(f"initial surface is not mean-convex (min H = {field.H.min():.3e})")
    if field.A_norm.max() >= cfg.blowup_threshold:
        raise PreconditionError("blowup_threshold must exceed the initial max|A|")
    traj.snapshots.append(Snapshot(t, curve.copy(), steps, epoch))
    traj.records.append(_record(curve, t, steps, 0.0, epoch, field, "start"))
    next_snap_t = cfg.snapshot_dt
    last_snap_A = float(field.A_norm.max())
    n_snap = 1
    last_dt = 0.0

    def fail(exc):
        traj.termination = {"kind": "error", "t_final": t, "steps": steps,
                            "message": str(exc), "error": type(exc).__name__}
        exc.trajectory = traj
        return exc

    while True:
        t_target = min(cfg.max_time, next_snap_t)
        budget = min(cfg.chunk_steps, cfg.max_steps - steps)
        st, t, taken, dt_used, amax, hmin = _advance(
            curve, r, z, t, t_target, budget, cfg, dt_fixed=cfg.dt or 0.0)
        steps += taken
        if taken:
            last_dt = dt_used
        curve = curve.with_nodes(r, z) if st != K.ST_MEAN_CONVEX else curve
        if st == K.ST_MEAN_CONVEX:
            raise fail(MeanConvexityError(f"H < 0 at t={t:.6g} (min H = {hmin:.3e})"))
        if st == K.ST_CFL:
            raise fail(StepSizeError(f"fixed dt={cfg.dt:.3e} exceeds the CFL bound at t={t:.6g}"))
        if st == K.ST_DT_FLOOR:
            raise fail(StepSizeError(f"time step fell below dt_min at t={t:.6g}"))
        field = fundamental_forms(curve)
        if st == K.ST_REDISTRIBUTE or _needs_refinement(curve, field, cfg):
            n_new = curve.n_nodes
            event = "redistribute"
            if st != K.ST_REDISTRIBUTE:
                n_new = 2 * curve.n_nodes
                event = "refine"
            curve = redistribute(curve, n_new)
            r, z = curve.r.copy(), curve.z.copy()
            epoch += 1
            field = fundamental_forms(curve)
            traj.records.append(_record(curve, t, steps, last_dt, epoch, field, event))
            continue
        amax = float(field.A_norm.max())
        snap = (st in (K.ST_TIME, K.ST_BLOWUP, K.ST_STEADY) or steps >= cfg.max_steps
                or amax >= cfg.snapshot_growth * last_snap_A)
        traj.records.append(_record(curve, t, steps, last_dt, epoch, field))
        if snap:
            if cfg.check_intersections and self_intersects(curve):
                raise fail(GeometryError(f"profile self-intersection at t={t:.6g}"))
            traj.snapshots.append(Snapshot(t, curve.copy(), steps, epoch))
            n_snap += 1
            last_snap_A = amax
            while next_snap_t <= t * (1 + 1e-12):
                next_snap_t += cfg.snapshot_dt
            if (cfg.window_every and n_snap % cfg.window_every == 0
                    and st in (K.ST_TIME, K.ST_STEPS) and t < cfg.max_time):
                times, curves = material_window(curve, t, cfg)
                traj.windows.append({"times": times, "curves": curves, "epoch": epoch})
        if st == K.ST_BLOWUP:
            traj.termination = {"kind": "blowup", "t_final": t, "steps": steps}
            break
        if st == K.ST_STEADY:
            traj.termination = {"kind": "steady", "t_final": t, "steps": steps}
            break
        if st == K.ST_TIME and t >= cfg.max_time:
            traj.termination = {"kind": "max_time", "t_final": t, "steps": steps}
            break
        if steps >= cfg.max_steps:
            traj.termination = {"kind": "max_steps", "t_final": t, "steps": steps}
            break
    if traj.termination["kind"] == "blowup":
        try:
            T_est, _ = detect_blowup(traj)
            traj.termination["T_est"] = T_est
        except (PreconditionError, ConsistencyError):
            traj.termination["T_est"] = float("nan")
    return traj


def detect_blowup(traj, decade=10.0):
    """Estimate the blow-up time and the type-I indicator.

    ``1/max|A|^2`` is fitted linearly in ``t`` over the final decade of
    ``max|A|`` and extrapolated to zero.

    Returns
    -------
    T_est : float
    type_one : ndarray of shape (m, 2)
        Columns ``t`` and ``max|A| sqrt(T_est - t)`` over the final decade.

    Raises
    ------
    PreconditionError
        If the trajectory did not end in blow-up.
    """
    if traj.termination.get("kind") != "blowup":
        raise PreconditionError("trajectory did not terminate by blow-up")
    t = traj.record_array("t")
    A = traj.record_array("max_A")
    keep = np.concatenate([[True], np.diff(t) > 0])
    t, A = t[keep], A[keep]
    sel = A >= A[-1] / decade
    if sel.sum() < 3:
        sel = np.zeros_like(sel)
        sel[-3:] = True
    y = 1.0 / A[sel] ** 2
    slope, icpt = np.polyfit(t[sel], y, 1)
    if not slope < 0:
        raise ConsistencyError("1/max|A|^2 is not decreasing near the end of the run")
    T_est = float(-icpt / slope)
    T_est = max(T_est, float(t[-1]))
    ts = t[sel]
    q = A[sel] * np.sqrt(np.maximum(T_est - ts, 0.0))
    good = ts < T_est
    return T_est, np.stack([ts[good], q[good]], axis=1)


def blowup_point(traj):
    """Estimated point where the surface shrinks to.

    For an axis-plus-barrier profile it is the intersection of the axis
    with the barrier nearest to the final axis node; otherwise the node of
    maximal curvature on the final snapshot.
    """
    c = traj.snapshots[-1].curve
    if not c.closed and c.end0 == "axis" and c.end1 == "barrier" and c.axisym:
        b = c.barrier
        if b.kind == "plane":
            zc = b.offset / b.normal[2]
            return np.array([0.0, zc])
        cz = b.center[2]
        cands = np.array([cz + b.radius, cz - b.radius])
        zc = cands[np.argmin(np.abs(cands - c.z[0]))]
        return np.array([0.0, zc])
    f = fundamental_forms(c)
    i = int(np.argmax(f.A_norm))
    if c.closed:
        return np.array([c.r.mean(), c.z.mean()])
    return np.array([c.r[i], c.z[i]])


def rescale_at_singularity(traj, num_frames):
    """Rescale the last snapshots about the blow-up point to ``max|A| = 1``.

    Frames are the snapshots whose ``max|A|`` is closest to ``num_frames``
    geometric levels over the final decade.  Each is translated so the
    blow-up point (:func:`blowup_point`) is the origin and dilated by its
    ``max|A|``.  The barrier is transformed along with it.
    """
    if num_frames <= 0:
        return []
    if traj.termination.get("kind") != "blowup":
        raise PreconditionError("trajectory did not terminate by blow-up")
    x0 = blowup_point(traj)
    amaxes = np.array([fundamental_forms(s.curve).A_norm.max() for s in traj.snapshots])
    levels = amaxes[-1] * np.geomspace(0.1, 1.0, num_frames)
    picks = []
    for lv in levels:
        i = int(np.argmin(np.abs(np.log(amaxes / lv))))
        if i not in picks:
            picks.append(i)
    frames = []
    for i in sorted(picks):
        c = traj.snapshots[i].curve
        lam = amaxes[i]
        r = lam * (c.r - x0[0])
        z = lam * (c.z - x0[1])
        b = None
        if c.barrier is not None:
            origin = np.array([x0[0], 0.0, x0[1]]) if c.axisym else x0
            b = c.barrier.rescaled(origin, lam)
        frames.append(ProfileCurve(r, z, c.end0, c.end1, c.n_dim, c.orientation, b, c.closed))
    return frames
