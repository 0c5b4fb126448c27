"""Experiment configuration files (TOML).

Sections: ``flow``, ``grid``, ``shape``, ``output``, optional ``sweep`` and
``checks``, plus a top-level ``seed``.  Unknown keys are rejected so that a
typo in ``p`` or ``cone`` cannot silently change which theorem is tested.
"""
import sys
from dataclasses import dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .curvature import CurvatureFunction
from .diagnostics import CheckSettings
from .errors import ConfigurationError
from .exact import validate_exponent
from .flow import FlowConfig
from .geometry import DEFAULT_V_CAP, make_initial
from .sphere import build_circle_grid, build_latlong_grid

SHAPE_PARAMS = {
    "sphere": {"r"},
    "ellipse": {"a", "b"},
    "ellipsoid_of_revolution": {"a", "c"},
    "perturbed_sphere": {"r", "eps", "mode"},
}

_FLOW_KEYS = {
    "p": (int, float), "F": str, "k": int, "q": (int, float), "cone": str, "mode": str,
    "dt_safety": (int, float), "t_end": (int, float), "tau_end": (int, float),
    "R_max": (int, float), "dt_min": (int, float), "sample_every": int, "v_cap": (int, float),
    "reference_radius": (int, float, str), "checkpoints": list, "max_steps": int,
}
_GRID_KEYS = {"dim": int, "N": int, "n_theta": int, "n_lambda": int}
_OUTPUT_KEYS = {"dir": str, "emit_plots": bool}
_SWEEP_AXES = {"p", "F", "shape"}
_SECTIONS = {"flow", "grid", "shape", "output", "sweep", "checks"}

REFERENCE_CHOICES = ("midrange", "calibrate")


@dataclass(frozen=True)
class ExperimentConfig:
    flow: dict
    grid: dict
    shape: dict
    output: dict = field(default_factory=lambda: {"dir": "out", "emit_plots": True})
    sweep: dict = None
    checks: dict = field(default_factory=dict)
    seed: int = 0

    def build_grid(self):
        if self.grid["dim"] == 1:
            return build_circle_grid(self.grid["N"])
        return build_latlong_grid(self.grid["n_theta"], self.grid["n_lambda"])

    def curvature_function(self):
        f = self.flow
        return CurvatureFunction(f["F"], self.grid["dim"], k=f.get("k"), q=f.get("q"), cone=f.get("cone"))

    def flow_config(self):
        f = self.flow
        ref = f.get("reference_radius")
        kwargs = {name: f[name] for name in (
            "mode", "dt_safety", "t_end", "tau_end", "R_max", "dt_min", "sample_every",
            "v_cap", "max_steps") if f.get(name) is not None}
        for key in ("dt_safety", "t_end", "tau_end", "R_max", "dt_min", "v_cap"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        return FlowConfig(
            p=f["p"],
            F=self.curvature_function(),
            reference_radius=float(ref) if isinstance(ref, (int, float)) else None,
            **kwargs,
        )

    def initial(self, grid=None):
        grid = grid or self.build_grid()
        params = {k: v for k, v in self.shape.items() if k != "kind"}
        return make_initial(grid, self.shape["kind"], **params)

    def check_settings(self):
        return CheckSettings(**{k: float(v) for k, v in self.checks.items()})

    @property
    def checkpoints(self):
        return tuple(float(c) for c in self.flow.get("checkpoints", ()))

    @property
    def calibrate(self):
        return self.flow.get("reference_radius") == "calibrate"

    def as_dict(self):
        d = {"flow": dict(self.flow), "grid": dict(self.grid), "shape": dict(self.shape),
             "output": dict(self.output), "seed": self.seed}
        if self.checks:
            d["checks"] = dict(self.checks)
        if self.sweep:
            d["sweep"] = dict(self.sweep)
        return d

    def with_overrides(self, p=None, F=None, shape=None):
        flow = dict(self.flow)
        if p is not None:
            flow["p"] = p
        if F is not None:
            flow["F"] = F
        return _validated(replace(self, flow=flow, shape=dict(shape) if shape else self.shape, sweep=None))


def _check_type(section, key, value, expected):
    if isinstance(value, bool) and expected is not bool and bool not in (
            expected if isinstance(expected, tuple) else (expected,)):
        raise ConfigurationError(f"{section}.{key}: expected a number, got boolean {value!r}")
    if not isinstance(value, expected):
        names = expected.__name__ if isinstance(expected, type) else "/".join(t.__name__ for t in expected)
        raise ConfigurationError(f"{section}.{key}: expected {names}, got {type(value).__name__} {value!r}")


def _strict(section, table, allowed):
    if not isinstance(table, dict):
        raise ConfigurationError(f"[{section}] must be a table")
    for key, value in table.items():
        if key not in allowed:
            raise ConfigurationError(f"unknown key {section}.{key} (allowed: {', '.join(sorted(allowed))})")
        _check_type(section, key, value, allowed[key])


def _validate_shape(shape, where="shape"):
    if "kind" not in shape:
        raise ConfigurationError(f"{where}.kind is required")
    kind = shape["kind"]
    if kind not in SHAPE_PARAMS:
        raise ConfigurationError(f"{where}.kind: unknown shape {kind!r}; expected one of {sorted(SHAPE_PARAMS)}")
    allowed = SHAPE_PARAMS[kind]
    for key, value in shape.items():
        if key == "kind":
            continue
        if key not in allowed:
            raise ConfigurationError(f"unknown key {where}.{key} for shape {kind} (allowed: {', '.join(sorted(allowed))})")
        _check_type(where, key, value, (int, float))
    missing = allowed - set(shape)
    if missing:
        raise ConfigurationError(f"{where}: shape {kind} needs {', '.join(sorted(missing))}")


def _validated(cfg):
    """Resolve every derived object once so errors surface at parse time."""
    try:
        validate_exponent(cfg.flow["p"])
    except ConfigurationError as exc:
        raise ConfigurationError(f"flow.p: {exc}") from None
    ref = cfg.flow.get("reference_radius")
    if isinstance(ref, str) and ref not in REFERENCE_CHOICES:
        raise ConfigurationError(f"flow.reference_radius: expected a number or one of {REFERENCE_CHOICES}, got {ref!r}")
    _validate_shape(cfg.shape)
    try:
        grid = cfg.build_grid()
        fc = cfg.flow_config()
        cfg.check_settings()
    except TypeError as exc:
        raise ConfigurationError(f"checks: {exc}") from None
    if fc.F.n != grid.dim:
        raise ConfigurationError(f"grid.dim={grid.dim} does not match the curvature function")
    try:
        cfg.initial(grid)
    except ValueError as exc:
        raise ConfigurationError(f"shape: {exc}") from None
    return cfg


def config_from_dict(data):
    data = dict(data)
    seed = data.pop("seed", 0)
    _check_type("", "seed", seed, int)
    unknown = set(data) - _SECTIONS
    if unknown:
        raise ConfigurationError(f"unknown section(s) {sorted(unknown)} (allowed: {sorted(_SECTIONS)}, seed)")
    for required in ("flow", "grid", "shape"):
        if required not in data:
            raise ConfigurationError(f"missing required section [{required}]")

    flow = dict(data["flow"])
    _strict("flow", flow, _FLOW_KEYS)
    for required in ("p", "F"):
        if required not in flow:
            raise ConfigurationError(f"flow.{required} is required")
    flow.setdefault("mode", "unrescaled")
    flow.setdefault("dt_safety", 0.2)
    flow.setdefault("dt_min", 1e-12)
    flow.setdefault("sample_every", 10)
    flow.setdefault("v_cap", DEFAULT_V_CAP)
    flow.setdefault("reference_radius", "midrange")
    for c in flow.get("checkpoints", ()):
        _check_type("flow", "checkpoints[]", c, (int, float))

    grid = dict(data["grid"])
    _strict("grid", grid, _GRID_KEYS)
    dim = grid.get("dim")
    if dim not in (1, 2):
        raise ConfigurationError(f"grid.dim must be 1 or 2, got {dim!r}")
    needed = {"N"} if dim == 1 else {"n_theta", "n_lambda"}
    extra = set(grid) - needed - {"dim"}
    if extra:
        raise ConfigurationError(f"grid keys {sorted(extra)} do not apply to dim={dim}")
    if needed - set(grid):
        raise ConfigurationError(f"grid needs {', '.join(sorted(needed - set(grid)))} for dim={dim}")

    shape = dict(data["shape"])

    output = {"dir": "out", "emit_plots": True}
    out_in = dict(data.get("output", {}))
    _strict("output", out_in, _OUTPUT_KEYS)
    output.update(out_in)

    checks = dict(data.get("checks", {}))
    allowed_checks = {f.name: (int, float) for f in fields(CheckSettings)}
    _strict("checks", checks, allowed_checks)

    sweep = None
    if "sweep" in data:
        sweep = dict(data["sweep"])
        for key, values in sweep.items():
            if key not in _SWEEP_AXES and not key.startswith("shape."):
                raise ConfigurationError(f"unknown sweep axis {key!r} (allowed: p, F, shape, shape.<param>)")
            if not isinstance(values, list) or not values:
                raise ConfigurationError(f"sweep.{key} must be a non-empty list")
        if not sweep:
            raise ConfigurationError("sweep section has no axes")

    return _validated(ExperimentConfig(flow, grid, shape, output, sweep, checks, seed))


def parse_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return config_from_dict(data)


def sweep_points(cfg):
    """Cartesian product over the sweep axes, in sorted axis order."""
    from itertools import product

    if not cfg.sweep:
        raise ConfigurationError("sweep mode needs a [sweep] section with non-empty axes")
    axes = sorted(cfg.sweep)
    points = []
    for combo in product(*(cfg.sweep[a] for a in axes)):
        choice = dict(zip(axes, combo))
        shape = dict(choice.get("shape", cfg.shape))
        for key, value in choice.items():
            if key.startswith("shape."):
                shape[key[len("shape."):]] = value
        try:
            point = cfg.with_overrides(p=choice.get("p"), F=choice.get("F"), shape=shape)
        except ConfigurationError as exc:
            raise ConfigurationError(f"sweep point {choice}: {exc}") from None
        points.append((choice, point))
    return points
