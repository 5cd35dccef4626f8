"""Persistence of runs: manifest, snapshots, windows and diagnostics.

Layout of a run directory::

    manifest.json     schema version, config text, termination, file list
    snapshots.jsonl   one JSON object per snapshot (t, step, epoch, curve)
    windows.jsonl     material windows (three states on the same nodes)
    records.csv       per-chunk flow records (fixed columns)
    diagnostics.csv   one row per (snapshot, quantity)

CSV files start with ``# schema_version=<n>`` and ``# columns=...`` comment
lines followed by a header row; floats are written with 17 significant
digits so files are bit-exact regression baselines.  JSON floats use
Python's shortest round-trip representation.
"""

import csv
import json
import os

import numpy as np

from .barrier import Barrier
from .exceptions import ConfigError
from .flow import FlowTrajectory, Snapshot
from .geometry import ProfileCurve

__all__ = [
    "SCHEMA_VERSION",
    "RECORD_COLUMNS",
    "DIAGNOSTIC_COLUMNS",
    "fmt",
    "write_csv",
    "read_csv",
    "write_run",
    "load_manifest",
    "load_trajectory",
    "read_diagnostics",
    "SchemaError",
]

SCHEMA_VERSION = 1
RECORD_COLUMNS = ("step", "t", "dt", "n_nodes", "epoch", "max_A", "min_H", "max_H", "area",
                  "int_H2", "defect", "event")
DIAGNOSTIC_COLUMNS = ("t", "step", "epoch", "quantity", "value")


class SchemaError(ConfigError):
    """A stored file has a missing or different schema version."""


def fmt(v):
    """Canonical text for a CSV cell (``.17g`` for floats)."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows):
    """Write a schema-headed CSV with fixed ``columns``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write(f"# columns={','.join(columns)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            cells = [row[c] for c in columns] if isinstance(row, dict) else row
            w.writerow([fmt(x) for x in cells])


def read_csv(path):
    """Read a schema-headed CSV; returns ``(columns, rows as dicts of str)``."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# schema_version={SCHEMA_VERSION}":
            raise SchemaError(f"{path}: unsupported schema header {first!r}")
        fh.readline()
        reader = csv.DictReader(fh)
        return tuple(reader.fieldnames or ()), list(reader)


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def _curve_json(curve):
    return curve.to_dict()


def _curve_from_json(d):
    b = Barrier.from_dict(d["barrier"]) if d.get("barrier") else None
    return ProfileCurve.from_dict(d, barrier=b)


def write_run(outdir, config_text, traj, diag_rows, extra=None):
    """Write a run directory and return the manifest dict."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "snapshots.jsonl"), "w", encoding="utf-8") as fh:
        for s in traj.snapshots:
            fh.write(_dump_json({"schema_version": SCHEMA_VERSION, "t": float(s.t),
                                 "step": int(s.step), "epoch": int(s.epoch),
                                 "curve": _curve_json(s.curve)}) + "\n")
    with open(os.path.join(outdir, "windows.jsonl"), "w", encoding="utf-8") as fh:
        for w in traj.windows:
            fh.write(_dump_json({"schema_version": SCHEMA_VERSION,
                                 "times": [float(x) for x in w["times"]],
                                 "epoch": int(w["epoch"]),
                                 "curves": [_curve_json(c) for c in w["curves"]]}) + "\n")
    write_csv(os.path.join(outdir, "records.csv"), RECORD_COLUMNS, traj.records)
    write_csv(os.path.join(outdir, "diagnostics.csv"), DIAGNOSTIC_COLUMNS, diag_rows)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": config_text,
        "flow_config": traj.config.to_dict() if traj.config is not None else None,
        "termination": _jsonable(traj.termination),
        "n_snapshots": len(traj.snapshots),
        "n_windows": len(traj.windows),
        "files": ["manifest.json", "snapshots.jsonl", "windows.jsonl", "records.csv",
                  "diagnostics.csv"],
    }
    if extra:
        manifest.update(_jsonable(extra))
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2, allow_nan=True) + "\n")
    return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def load_manifest(rundir):
    """Read ``manifest.json``; ``ConfigError`` if absent, ``SchemaError`` if mismatched."""
    path = os.path.join(rundir, "manifest.json")
    if not os.path.isfile(path):
        raise ConfigError(f"no run found in {rundir!r} (missing manifest.json)")
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"manifest schema {manifest.get('schema_version')!r} "
                          f"!= {SCHEMA_VERSION}")
    return manifest


def load_trajectory(rundir):
    """Rebuild a :class:`FlowTrajectory` (snapshots and windows) from disk."""
    manifest = load_manifest(rundir)
    traj = FlowTrajectory(termination=manifest.get("termination", {}))
    with open(os.path.join(rundir, "snapshots.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            d = json.loads(line)
            if d.get("schema_version") != SCHEMA_VERSION:
                raise SchemaError("snapshot schema mismatch")
            traj.snapshots.append(Snapshot(d["t"], _curve_from_json(d["curve"]), d["step"],
                                           d["epoch"]))
    wpath = os.path.join(rundir, "windows.jsonl")
    if os.path.isfile(wpath):
        with open(wpath, encoding="utf-8") as fh:
            for line in fh:
                d = json.loads(line)
                if d.get("schema_version") != SCHEMA_VERSION:
                    raise SchemaError("window schema mismatch")
                traj.windows.append({"times": np.array(d["times"]), "epoch": d["epoch"],
                                     "curves": [_curve_from_json(c) for c in d["curves"]]})
    if not traj.snapshots:
        raise ConfigError(f"run in {rundir!r} has no snapshots")
    return manifest, traj


def read_diagnostics(rundir):
    """Diagnostics as ``{quantity: (t array, value array)}``."""
    _, rows = read_csv(os.path.join(rundir, "diagnostics.csv"))
    out = {}
    for r in rows:
        out.setdefault(r["quantity"], ([], []))
        out[r["quantity"]][0].append(float(r["t"]))
        out[r["quantity"]][1].append(float(r["value"]))
    return {k: (np.array(a), np.array(b)) for k, (a, b) in out.items()}
