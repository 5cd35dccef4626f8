"""Run configuration: a flat ``key = value`` text format with dotted sections.

Grammar (one assignment per line)::

    # comment
    scenario = cap45
    surface.kind = spherical_cap
    surface.theta_deg = 45
    surface.nodes = 128
    flow.max_time = 1.0
    diagnostics.sigma = 0.1

* keys are dotted identifiers from :data:`KEYS`; unknown or repeated keys
  are errors;
* values are ``true``/``false``, ``none``, integers, floats, comma-separated
  lists of numbers, or bare strings;
* blank lines and text after ``#`` are ignored.

The only environment variable consulted is :data:`OUTPUT_ENV`, which
overrides ``output.dir``.
"""

import os
import re
from dataclasses import dataclass, field, fields

import numpy as np

from .barrier import Barrier
from .diagnostics import PinchParams
from .exceptions import ConfigError, PreconditionError
from .flow import FlowConfig
from . import geometry as geo
from .inequalities import StampacchiaConfig

__all__ = ["RunConfig", "KEYS", "OUTPUT_ENV", "parse_value", "parse_config", "load_config",
           "apply_overrides", "MIN_NODES"]

OUTPUT_ENV = "FBMCF_OUTPUT_DIR"
MIN_NODES = 32
SURFACE_KINDS = ("half_sphere", "perturbed_half_sphere", "spherical_cap", "perturbed_cap",
                 "equatorial_disk")
SUITES = ("evolution_residuals", "boundary", "inequalities", "pinching")

_FLOW_KEYS = {f"flow.{f.name}" for f in fields(FlowConfig)}
_DIAG_KEYS = {f"diagnostics.{f.name}" for f in fields(PinchParams)}
_STAMP_KEYS = {"stampacchia.p", "stampacchia.sigma", "stampacchia.beta", "stampacchia.k_levels",
               "stampacchia.k0_frac"}
KEYS = frozenset({
    "scenario", "seed", "output.dir",
    "barrier.kind", "barrier.radius", "barrier.offset",
    "surface.kind", "surface.radius", "surface.theta_deg", "surface.amplitudes",
    "surface.random_modes", "surface.random_scale", "surface.nodes", "surface.warp",
    "diagnostics.every", "diagnostics.window_interval",
    "verify.evolution_tol", "verify.boundary_tol", "verify.area_tol",
    "verify.boundary_skip_fraction",
} | _FLOW_KEYS | _DIAG_KEYS | _STAMP_KEYS)

_IDENT = re.compile(r"^[a-z_][a-z0-9_]*(\.[a-z_][a-z0-9_]*)*$")
_NUM = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def parse_value(text):
    """Convert a value string to ``bool``, ``None``, number, list or ``str``."""
    s = text.strip()
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return None
    if "," in s:
        items = [x.strip() for x in s.split(",") if x.strip()]
        if not all(_NUM.match(x) for x in items):
            raise ConfigError(f"list values must be numeric: {text!r}")
        return [parse_value(x) for x in items]
    if _NUM.match(s):
        if re.match(r"^[+-]?\d+$", s):
            return int(s)
        return float(s)
    if not s:
        raise ConfigError("empty value")
    return s


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, (list, tuple)):
        return ", ".join(_format_value(x) for x in v) + ("," if len(v) == 1 else "")
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class RunConfig:
    """A validated run description (see the module docstring for the grammar)."""

    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    # -- derived objects ---------------------------------------------------
    @property
    def scenario(self):
        return str(self.get("scenario", "run"))

    @property
    def seed(self):
        return int(self.get("seed", 0))

    def flow_config(self):
        kw = {k.split(".", 1)[1]: v for k, v in self.values.items() if k in _FLOW_KEYS}
        if "max_steps" in kw:
            kw["max_steps"] = int(kw["max_steps"])
        try:
            return FlowConfig(**kw)
        except (TypeError, PreconditionError) as exc:
            raise ConfigError(f"invalid flow settings: {exc}") from exc

    def pinch_params(self):
        kw = {k.split(".", 1)[1]: v for k, v in self.values.items() if k in _DIAG_KEYS}
        return PinchParams(**kw)

    def stampacchia_config(self):
        kw = {k.split(".", 1)[1]: v for k, v in self.values.items() if k in _STAMP_KEYS}
        try:
            return StampacchiaConfig(**kw)
        except PreconditionError as exc:
            raise ConfigError(str(exc)) from exc

    def output_dir(self):
        env = os.environ.get(OUTPUT_ENV)
        if env:
            return env
        return str(self.get("output.dir", os.path.join("runs", self.scenario)))

    def amplitudes(self):
        amps = self.get("surface.amplitudes")
        if amps is None:
            m = int(self.get("surface.random_modes", 0))
            if m <= 0:
                return ()
            rng = np.random.default_rng(self.seed)
            scale = float(self.get("surface.random_scale", 0.01))
            return tuple(float(x) for x in rng.uniform(-scale, scale, m))
        return tuple(float(x) for x in (amps if isinstance(amps, list) else [amps]))

    def initial_curve(self):
        """Build the initial profile curve (with its barrier)."""
        kind = self.get("surface.kind", "half_sphere")
        n = int(self.get("surface.nodes", 128))
        theta = np.deg2rad(float(self.get("surface.theta_deg", 45.0)))
        if kind in ("half_sphere", "perturbed_half_sphere"):
            radius = float(self.get("surface.radius", 1.0))
            if kind == "half_sphere":
                curve = geo.half_sphere(radius, n, warp=float(self.get("surface.warp", 0.0)))
            else:
                amps = self.amplitudes() or (0.1,)
                curve = geo.perturbed_half_sphere(amps[0], 1, n, radius)
            off = float(self.get("barrier.offset", 0.0))
            if off:
                b = Barrier.plane((0.0, 0.0, 1.0), off, orientation=-1)
                curve = geo.ProfileCurve(curve.r, curve.z + off, curve.end0, curve.end1,
                                         curve.n_dim, curve.orientation, b)
            return curve
        if kind == "spherical_cap":
            curve = geo.spherical_cap(theta, n)
        elif kind == "perturbed_cap":
            curve = geo.perturbed_cap(theta, self.amplitudes(), n)
        else:
            curve = geo.equatorial_disk(n)
        R = float(self.get("barrier.radius", 1.0))
        if R != 1.0:
            b = curve.barrier.rescaled(np.zeros(3), R)
            curve = geo.ProfileCurve(R * curve.r, R * curve.z, curve.end0, curve.end1,
                                     curve.n_dim, curve.orientation, b)
        return curve

    # -- validation / serialisation ---------------------------------------
    def validate(self):
        unknown = sorted(set(self.values) - KEYS)
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        kind = self.get("surface.kind", "half_sphere")
        if kind not in SURFACE_KINDS:
            raise ConfigError(f"surface.kind must be one of {SURFACE_KINDS}")
        bkind = self.get("barrier.kind")
        implied = "plane" if kind.endswith("half_sphere") else "sphere"
        if bkind is not None and bkind != implied:
            raise ConfigError(f"surface {kind} requires a {implied} barrier, got {bkind}")
        n = self.get("surface.nodes", 128)
        if not isinstance(n, int) or n < MIN_NODES:
            raise ConfigError(f"surface.nodes must be an integer >= {MIN_NODES}")
        for key in ("surface.radius", "barrier.radius"):
            v = self.get(key, 1.0)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"{key} must be a positive number")
        if kind in ("spherical_cap", "perturbed_cap"):
            th = self.get("surface.theta_deg", 45.0)
            if not isinstance(th, (int, float)) or not 0 < th < 90:
                raise ConfigError("surface.theta_deg must lie in (0, 90)")
        if not isinstance(self.get("seed", 0), int):
            raise ConfigError("seed must be an integer")
        try:
            self.pinch_params()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        self.flow_config()
        self.stampacchia_config()
        try:
            self.initial_curve()
        except PreconditionError as exc:
            raise ConfigError(f"invalid surface: {exc}") from exc
        return self

    def to_text(self):
        """Canonical text form (sorted keys); parses back to an equal config."""
        return "".join(f"{k} = {_format_value(self.values[k])}\n" for k in sorted(self.values))

    def with_values(self, **updates):
        vals = dict(self.values)
        vals.update(updates)
        return RunConfig(vals).validate()


def parse_config(text):
    """Parse configuration text into a validated :class:`RunConfig`."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if not _IDENT.match(key):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = parse_value(val)
    return RunConfig(values).validate()


def apply_overrides(cfg, overrides):
    """Apply ``["key=value", ...]`` overrides to a config."""
    vals = dict(cfg.values)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must be key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        if not _IDENT.match(k):
            raise ConfigError(f"malformed key {k!r}")
        vals[k] = parse_value(v)
    return RunConfig(vals).validate()


def load_config(path, overrides=None):
    """Read and validate a config file (``ConfigError`` if missing or invalid)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text)
    return apply_overrides(cfg, overrides) if overrides else cfg
