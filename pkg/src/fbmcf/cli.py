"""Command-line front end: ``run``, ``verify``, ``sweep`` and ``report``.

Exit codes: 0 success, 1 configuration / input error (including missing or
schema-mismatched run directories), 2 numerical-consistency failure (for
example loss of mean-convexity or a step above the CFL bound).
"""

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import diagnostics as diag
from . import inequalities as ineq
from .config import SUITES, apply_overrides, load_config, parse_config, parse_value
from .exceptions import ConfigError, FlowLabError
from .flow import detect_blowup, material_window, rescale_at_singularity, run
from .geometry import fundamental_forms, integrate_bulk
from .io import (
    fmt,
    load_manifest,
    load_trajectory,
    read_diagnostics,
    write_csv,
    write_run,
)

__all__ = ["main", "execute", "snapshot_diagnostics", "verify_suite", "EXIT_OK",
           "EXIT_CONFIG", "EXIT_NUMERICAL"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

DEFAULT_TOL = {"verify.evolution_tol": 1e-2, "verify.boundary_tol": 0.05,
               "verify.area_tol": 0.05}


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


# -- diagnostics during a run --------------------------------------------------

def snapshot_diagnostics(traj, cfg):
    """Rows ``(t, step, epoch, quantity, value)`` for every snapshot.

    Pinching functionals need ``H > 0`` and are skipped on snapshots where
    it fails (flat disks); perturbed-curvature invariants are asserted on
    every snapshot.
    """
    params = cfg.pinch_params()
    every = int(cfg.get("diagnostics.every", 1))
    barrier = traj.snapshots[0].curve.barrier
    D0 = barrier.calibrate_D0() if barrier is not None else 1.0
    rows = []
    for j, s in enumerate(traj.snapshots):
        if every > 1 and j % every and j != len(traj.snapshots) - 1:
            continue
        c = s.curve
        fld = fundamental_forms(c)
        q = {"n_nodes": c.n_nodes, "max_A": float(fld.A_norm.max()),
             "min_H": float(fld.H.min()), "max_H": float(fld.H.max()),
             "area": integrate_bulk(c, 1.0),
             "int_H2": integrate_bulk(c, fld.H**2)}
        pert = diag.perturbed(c, barrier, D0, fld)
        q["min_Hbar_minus_H"] = float((pert.H_bar - fld.H).min())
        q["min_Abar"] = float(pert.A_bar.min())
        if fld.H.min() > 0:
            pf = diag.pinch_functionals(c, barrier, params, t=s.t, D0=D0, field=fld, pert=pert)
            if params.D is None and "D" in pf:
                params.D = pf["D"]
            for k in diag.PINCH_KEYS:
                if k in pf:
                    q[k] = pf[k]
        if c.barrier_ends():
            br = diag.boundary_residuals(c, fld)
            for k in ("NH", "NH_scaled", "hNX", "lemma_ij", "lemma_11", "N_gradHV"):
                if k in br:
                    q["bdry_" + k] = br[k]
        for k in sorted(q):
            rows.append({"t": s.t, "step": s.step, "epoch": s.epoch, "quantity": k,
                         "value": q[k]})
    return rows


def run_summary(traj, rows):
    """Scalar summary stored in the manifest."""
    out = {}
    by = {}
    for r in rows:
        by.setdefault(r["quantity"], []).append((r["t"], r["value"]))
    for k in ("ratio_AH", "f_umbilic", "f_convex", "g_gradient", "max_A"):
        if k in by:
            out[f"max_{k}"] = float(max(v for _, v in by[k]))
    if "ratio_AH" in by and len(by["ratio_AH"]) >= 2:
        t, v = np.array(by["ratio_AH"]).T
        a, C, r2 = diag.fit_exponential_rate(t, v)
        out["alpha_fit"], out["alpha_fit_C"], out["alpha_fit_R2"] = a, C, r2
    if traj.termination.get("kind") == "blowup":
        try:
            T, ti = detect_blowup(traj)
            out["T_est"] = T
            if ti.size:
                med = float(np.median(ti[:, 1]))
                out["type_I_median"] = med
                out["type_I_spread"] = float(np.max(np.abs(ti[:, 1] / med - 1.0)))
            frames = rescale_at_singularity(traj, 3)
            if frames:
                f = fundamental_forms(frames[-1])
                out["rescaled_umbilicity"] = float(np.max(np.abs(f.lam1 - f.lam2))
                                                   / np.max(f.A_norm))
        except FlowLabError as exc:
            out["blowup_analysis_error"] = str(exc)
    return out


def execute(cfg, outdir):
    """Run a validated config into ``outdir``; returns the exit code."""
    curve = cfg.initial_curve()
    flow_cfg = cfg.flow_config()
    try:
        traj = run(flow_cfg, curve)
        rows = snapshot_diagnostics(traj, cfg)
    except FlowLabError as exc:
        traj = getattr(exc, "trajectory", None)
        _err(f"{type(exc).__name__}: {exc}")
        if traj is not None:
            write_run(outdir, cfg.to_text(), traj, [], {"seed": cfg.seed,
                                                        "scenario": cfg.scenario})
        return EXIT_NUMERICAL
    extra = {"seed": cfg.seed, "scenario": cfg.scenario, "summary": run_summary(traj, rows)}
    write_run(outdir, cfg.to_text(), traj, rows, extra)
    return EXIT_OK


# -- verification ----------------------------------------------------------------

def _tol(cfg, key):
    return float(cfg.get(key, DEFAULT_TOL[key]))


def _finite(x):
    return x is not None and math.isfinite(x)


def verify_suite(suite, manifest, traj, cfg):
    """Run one check suite; returns a report dict with a ``passed`` flag."""
    checks = {}
    info = {}
    snaps = traj.snapshots
    if suite == "evolution_residuals":
        tol = _tol(cfg, "verify.evolution_tol")
        windows = list(traj.windows)
        if not windows:
            # initial data need not satisfy the boundary compatibility
            # conditions, so the window starts from the first snapshot at t > 0
            s0 = next((s for s in snaps if s.t > 0), snaps[0])
            c0 = s0.curve
            interval = cfg.get("diagnostics.window_interval")
            interval = float(interval) if interval else 0.05 * c0.segment_lengths().min()
            times, curves = material_window(c0, s0.t, cfg.flow_config(), interval=interval)
            windows = [{"times": times, "curves": curves, "epoch": s0.epoch}]
        worst = {}
        for w in windows:
            res = diag.evolution_residuals(w["times"], w["curves"])
            for k, v in res.items():
                if not k.endswith("_abs"):
                    worst[k] = max(worst.get(k, 0.0), v)
        info["residuals"] = worst
        for k, v in worst.items():
            checks[f"{k}_residual<= {tol:g}"] = bool(v <= tol)
    elif suite == "boundary":
        tol = _tol(cfg, "verify.boundary_tol")
        # the identities hold for t > 0 only; initial data need not satisfy
        # them, so the first fraction of the run (compatibility layer) is skipped
        skip = float(cfg.get("verify.boundary_skip_fraction", 0.25))
        t_end = snaps[-1].t
        chosen = [s for s in snaps if s.t > 0 and s.t >= skip * t_end]
        chosen = chosen or [snaps[-1]]
        if not chosen[0].curve.barrier_ends():
            info["note"] = "no barrier end"
        else:
            worst = {}
            for s in chosen:
                br = diag.boundary_residuals(s.curve)
                for k in ("NH_scaled", "hNX", "lemma_ij", "lemma_11", "N_gradHV"):
                    if k in br:
                        worst[k] = max(worst.get(k, 0.0), float(br[k]))
            info["residuals"] = worst
            checks["hNX==0"] = worst.get("hNX", 0.0) == 0.0
            for k in ("NH_scaled", "lemma_ij", "lemma_11", "N_gradHV"):
                if k in worst:
                    checks[f"{k}<= {tol:g}"] = bool(worst[k] <= tol)
    elif suite == "inequalities":
        tol = _tol(cfg, "verify.area_tol")
        if len(snaps) >= 3:
            am = ineq.area_monotonicity(traj)
            res = am["residual"][np.isfinite(am["residual"])]
            info["area_max_increase"] = am["max_increase"]
            info["area_max_residual"] = float(res.max()) if res.size else 0.0
            checks["area_monotone"] = bool(am["monotone"])
            checks[f"area_residual<= {tol:g}"] = bool(info["area_max_residual"] <= tol)
        c0 = snaps[0].curve
        if c0.barrier_ends():
            for name, kw in (("trace", {"ratio": ineq.trace_ratio}),
                             ("sobolev", {"ratio": ineq.sobolev_ratio})):
                sup, arg, _ = ineq.family_sup(c0, **kw)
                info[f"{name}_sup"] = sup
                info[f"{name}_argmax"] = arg
                checks[f"{name}_sup_finite"] = _finite(sup)
        if len(snaps) >= 3 and all(fundamental_forms(s.curve).H.min() > 0 for s in snaps):
            sm = ineq.star_monitor(traj, cfg.stampacchia_config())
            info["star_c"] = sm["c"]
            info["star_poincare_min_margin"] = float(np.nanmin(sm["poincare_margin"][1:]))
            em = sm["evolution_margin"][sorted(sm["evolution_margin"])[0]]
            info["star_evolution_min_margin"] = float(np.nanmin(em)) if np.isfinite(em).any() \
                else float("nan")
            info["star_fit"] = sm["fit"]
            checks["level_sets_nested"] = bool(sm["nested"])
            checks["holder_selfcheck"] = bool(sm["holder"] <= 1e-12)
    elif suite == "pinching":
        barrier = snaps[0].curve.barrier
        D0 = barrier.calibrate_D0() if barrier is not None else 1.0
        params = cfg.pinch_params()
        worst = {}
        for s in snaps:
            fld = fundamental_forms(s.curve)
            pert = diag.perturbed(s.curve, barrier, D0, fld)  # asserts invariants
            if fld.H.min() > 0:
                pf = diag.pinch_functionals(s.curve, barrier, params, t=s.t, D0=D0,
                                            field=fld, pert=pert)
                if params.D is None and "D" in pf:
                    params.D = pf["D"]
                for k in diag.PINCH_KEYS:
                    if k in pf:
                        worst[k] = max(worst.get(k, -np.inf), float(pf[k]))
        info["max"] = worst
        checks["perturbed_invariants"] = True
        checks["functionals_finite"] = all(_finite(v) for v in worst.values())
    else:
        raise ConfigError(f"unknown suite {suite!r}")
    return {"suite": suite, "passed": all(checks.values()), "checks": checks, "info": info}


def _report_text(report):
    lines = [f"suite {report['suite']}: {'PASS' if report['passed'] else 'FAIL'}"]
    for k, v in report["checks"].items():
        lines.append(f"  [{'pass' if v else 'FAIL'}] {k}")
    return "\n".join(lines) + "\n"


def cmd_verify(rundir, suite):
    manifest, traj = load_trajectory(rundir)
    cfg = parse_config(manifest["config"])
    suites = SUITES if suite == "all" else (suite,)
    reports = []
    for s in suites:
        try:
            reports.append(verify_suite(s, manifest, traj, cfg))
        except FlowLabError as exc:
            if isinstance(exc, ConfigError):
                raise
            reports.append({"suite": s, "passed": False, "checks": {"error": False},
                            "info": {"error": f"{type(exc).__name__}: {exc}"}})
    out = {"schema_version": manifest["schema_version"], "run": rundir, "reports": reports,
           "passed": all(r["passed"] for r in reports)}
    with open(os.path.join(rundir, f"verify_{suite}.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_clean(out), sort_keys=True, indent=2) + "\n")
    text = "".join(_report_text(r) for r in reports)
    with open(os.path.join(rundir, f"verify_{suite}.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK if out["passed"] else EXIT_NUMERICAL


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- sweep -----------------------------------------------------------------------

def parse_axes(spec):
    """``"key=v1,v2;key2=w1,w2"`` -> ``[(key, [values...]), ...]``."""
    axes = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"axis {part!r} must be key=v1,v2,...")
        key, vals = (s.strip() for s in part.split("=", 1))
        items = [v.strip() for v in vals.split(",") if v.strip()]
        if not items:
            raise ConfigError(f"axis {key!r} has no values")
        axes.append((key, [parse_value(v) for v in items]))
    if not axes:
        raise ConfigError("empty sweep axis")
    return axes


def _sweep_one(args):
    text, overrides, outdir = args
    try:
        cfg = apply_overrides(parse_config(text), overrides)
    except ConfigError as exc:
        return EXIT_CONFIG, str(exc)
    return execute(cfg, outdir), ""


def convergence_orders(ns, values):
    """Observed orders from consecutive triples of refinements.

    For values ``v1, v2, v3`` at sizes ``n1 < n2 < n3`` the order is
    ``log(|v1-v2| / |v2-v3|) / log(n2/n1)``; it is attached to the finest
    run of each triple (``nan`` elsewhere).
    """
    order = [float("nan")] * len(ns)
    idx = sorted(range(len(ns)), key=lambda i: ns[i])
    for a, b, c in zip(idx, idx[1:], idx[2:]):
        e1 = abs(values[a] - values[b])
        e2 = abs(values[b] - values[c])
        if e1 > 0 and e2 > 0 and all(map(_finite, (values[a], values[b], values[c]))):
            order[c] = math.log(e1 / e2) / math.log(ns[b] / ns[a])
    return order


SUMMARY_KEYS = ("T_est", "alpha_fit", "alpha_fit_R2", "max_ratio_AH", "max_f_umbilic",
                "max_f_convex", "max_g_gradient", "type_I_spread", "rescaled_umbilicity")


def cmd_sweep(template, axis_spec, outdir=None, jobs=None):
    cfg = load_config(template)
    axes = parse_axes(axis_spec)
    base = outdir or os.environ.get("FBMCF_OUTPUT_DIR") or (cfg.output_dir() + "_sweep")
    combos = list(itertools.product(*[vals for _, vals in axes]))
    keys = [k for k, _ in axes]
    tasks = []
    for i, combo in enumerate(combos):
        ov = [f"{k}={fmt(v)}" for k, v in zip(keys, combo)]
        apply_overrides(cfg, ov)  # validate before launching
        tasks.append((cfg.to_text(), ov, os.path.join(base, f"run_{i:03d}")))
    os.makedirs(base, exist_ok=True)
    jobs = jobs or min(len(tasks), os.cpu_count() or 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    rows = []
    for (text, ov, rdir), combo, (code, msg) in zip(tasks, combos, results):
        row = {"run": os.path.basename(rdir), "exit_code": code}
        row.update({k: v for k, v in zip(keys, combo)})
        summ = {}
        term = ""
        if os.path.isfile(os.path.join(rdir, "manifest.json")):
            m = load_manifest(rdir)
            summ = m.get("summary", {})
            term = m.get("termination", {}).get("kind", "")
        row["termination"] = term
        for k in SUMMARY_KEYS:
            row[k] = summ.get(k, float("nan"))
        row["passed"] = code == EXIT_OK
        rows.append(row)
    cols = ["run"] + keys + ["exit_code", "termination"] + list(SUMMARY_KEYS) + ["passed"]
    if "surface.nodes" in keys and len(combos) >= 3 and len(keys) == 1:
        order = convergence_orders([r["surface.nodes"] for r in rows],
                                   [r["T_est"] for r in rows])
        for r, o in zip(rows, order):
            r["order_T_est"] = o
        cols.append("order_T_est")
    write_csv(os.path.join(base, "summary.csv"), cols, rows)
    failed = [r["run"] for r in rows if not r["passed"]]
    for r in failed:
        _err(f"sweep member {r} failed")
    print(f"sweep: {len(rows)} runs, {len(failed)} failed -> {base}/summary.csv")
    return EXIT_OK if not failed else EXIT_NUMERICAL


# -- report ----------------------------------------------------------------------

def cmd_report(rundir):
    manifest = load_manifest(rundir)
    diags = read_diagnostics(rundir)
    rows = []
    for q in sorted(diags):
        t, v = diags[q]
        rows.append({"quantity": q, "n": v.size, "min": float(np.min(v)),
                     "max": float(np.max(v)), "final": float(v[-1]), "t_final": float(t[-1])})
    write_csv(os.path.join(rundir, "report.csv"), ("quantity", "n", "min", "max", "final",
                                                   "t_final"), rows)
    rep = {"schema_version": manifest["schema_version"], "scenario": manifest.get("scenario"),
           "termination": manifest.get("termination"), "summary": manifest.get("summary", {}),
           "quantities": rows}
    with open(os.path.join(rundir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_clean(rep), sort_keys=True, indent=2) + "\n")
    lines = [f"scenario: {manifest.get('scenario')}",
             f"termination: {json.dumps(_clean(manifest.get('termination')), sort_keys=True)}"]
    for k, v in sorted(manifest.get("summary", {}).items()):
        lines.append(f"{k}: {fmt(v)}")
    lines.append("")
    lines.append(f"{'quantity':<22}{'min':>24}{'max':>24}{'final':>24}")
    for r in rows:
        lines.append(f"{r['quantity']:<22}{r['min']:>24.17g}{r['max']:>24.17g}"
                     f"{r['final']:>24.17g}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(rundir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="fbmcf", description=(
        "Mean curvature flow with free boundary on a plane or sphere barrier "
        "(axisymmetric profile discretisation)."))
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a configured flow and write its diagnostics")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value (repeatable)")
    r.add_argument("--output", help="output directory (overrides output.dir)")
    v = sub.add_parser("verify", help="run a check suite on a stored run")
    v.add_argument("rundir")
    v.add_argument("suite", choices=SUITES + ("all",))
    s = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    s.add_argument("template")
    s.add_argument("axis", help='e.g. "surface.theta_deg=30,45,60" (";" separates axes)')
    s.add_argument("--output")
    s.add_argument("--jobs", type=int, default=None)
    rp = sub.add_parser("report", help="summarise a stored run")
    rp.add_argument("rundir")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config, args.set)
            outdir = args.output or cfg.output_dir()
            code = execute(cfg, outdir)
            if code == EXIT_OK:
                print(f"run written to {outdir}")
            return code
        if args.command == "verify":
            return cmd_verify(args.rundir, args.suite)
        if args.command == "sweep":
            return cmd_sweep(args.template, args.axis, args.output, args.jobs)
        return cmd_report(args.rundir)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except FlowLabError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
