"""Run configuration: a flat ``key = value`` text format with dotted section names.

Every key is optional in a file; missing keys take the schema default.  The
format round-trips losslessly (floats are written with ``repr``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .diagnostics import DiagnosticsConfig
from .field import GridSpec
from .solver import Params, StepperConfig
from .synth import FAMILIES


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# dotted key, attribute, type, default, description
SCHEMA = (
    ("grid.n", "n", int, 64, "grid points per side (power of two >= 8)"),
    ("params.chi", "chi", float, 0.5, "vortex viscosity chi > 0"),
    ("params.nu", "nu", float, 1.0, "angular viscosity nu > 0"),
    ("params.beta", "beta", float, 1.0, "temperature dissipation exponent in [0, 2]; 1 is critical"),
    ("params.alpha", "alpha", float, 0.0, "optional velocity dissipation exponent; 0 disables"),
    ("init.family", "family", str, "random-bandlimited", "initial data: " + ", ".join(FAMILIES)),
    ("init.amplitude", "amplitude", float, 0.5, "initial-data amplitude"),
    ("init.seed", "seed", int, 0, "seed for random families"),
    ("time.t_end", "t_end", float, 1.0, "final time"),
    ("stepper.cfl", "cfl", float, 0.4, "Courant number in (0, 1]"),
    ("stepper.dt_max", "dt_max", float, 0.01, "largest time step; steps are dt_max / 2^m"),
    ("stepper.scheme", "scheme", str, "IF-RK2", "time-stepping scheme"),
    ("output.every", "every", float, 0.05, "time between diagnostics rows"),
    ("output.checkpoint_every", "checkpoint_every", float, 0.0,
     "time between checkpoints; 0 writes only the final one"),
    ("output.dir", "out_dir", str, "runs/run", "run directory"),
    ("diagnostics.k", "k", float, 0.6, "H^k regularity index for theta"),
    ("diagnostics.r", "r", float, 8.0, "L^r exponent for Gamma and omega"),
    ("diagnostics.hs", "hs", float, 3.0, "Sobolev index of the H^s norms"),
)

_BY_KEY = {key: (attr, typ) for key, attr, typ, _, _ in SCHEMA}
_BY_ATTR = {attr: key for key, attr, _, _, _ in SCHEMA}


@dataclass(frozen=True)
class RunConfig:
    n: int = 64
    chi: float = 0.5
    nu: float = 1.0
    beta: float = 1.0
    alpha: float = 0.0
    family: str = "random-bandlimited"
    amplitude: float = 0.5
    seed: int = 0
    t_end: float = 1.0
    cfl: float = 0.4
    dt_max: float = 0.01
    scheme: str = "IF-RK2"
    every: float = 0.05
    checkpoint_every: float = 0.0
    out_dir: str = "runs/run"
    k: float = 0.6
    r: float = 8.0
    hs: float = 3.0

    def __post_init__(self):
        self.validate()

    # -- derived objects ---------------------------------------------------
    @property
    def params(self) -> Params:
        return Params(self.chi, self.nu, self.beta, self.alpha)

    @property
    def stepper(self) -> StepperConfig:
        return StepperConfig(self.cfl, self.dt_max, self.scheme)

    @property
    def diagnostics(self) -> DiagnosticsConfig:
        return DiagnosticsConfig(self.k, self.r, self.hs)

    def validate(self) -> None:
        for f in fields(self):
            _, typ = _BY_KEY[_BY_ATTR[f.name]]
            value = getattr(self, f.name)
            if typ is float and not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ConfigError(_BY_ATTR[f.name], f"expected a finite number, got {value!r}")
        _check("grid", ("n",), lambda: GridSpec(self.n))
        _check("params", ("chi", "nu", "beta", "alpha"), lambda: self.params)
        _check("stepper", ("cfl", "dt_max", "scheme"), lambda: self.stepper)
        _check("diagnostics", ("k", "r", "hs"), lambda: self.diagnostics)
        if self.family not in FAMILIES:
            raise ConfigError("init.family", f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.amplitude < 0:
            raise ConfigError("init.amplitude", f"must be >= 0, got {self.amplitude}")
        if self.seed < 0:
            raise ConfigError("init.seed", f"must be >= 0, got {self.seed}")
        if not self.t_end > 0:
            raise ConfigError("time.t_end", f"must be > 0, got {self.t_end}")
        if not self.every > 0:
            raise ConfigError("output.every", f"must be > 0, got {self.every}")
        if self.checkpoint_every < 0:
            raise ConfigError("output.checkpoint_every", f"must be >= 0, got {self.checkpoint_every}")
        if not self.out_dir:
            raise ConfigError("output.dir", "must not be empty")

    # -- text format -------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for key, attr, _, _, _ in SCHEMA:
            lines.append(f"{key} = {_format(getattr(self, attr))}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, overrides: dict[str, str]) -> "RunConfig":
        changes = {}
        for key, raw in overrides.items():
            if key not in _BY_KEY:
                raise ConfigError(key, "unknown configuration key")
            attr, typ = _BY_KEY[key]
            changes[attr] = _convert(key, typ, raw)
        return replace(self, **changes)

    def get(self, key: str):
        if key not in _BY_KEY:
            raise ConfigError(key, "unknown configuration key")
        return getattr(self, _BY_KEY[key][0])


def _check(section: str, names, build) -> None:
    """Run a constructor and attribute its ValueError to a dotted key."""
    try:
        build()
    except ValueError as exc:
        words = str(exc).replace(",", " ").split()
        name = next((w for w in words if w in names), names[0])
        raise ConfigError(f"{section}.{name}", str(exc)) from None


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(key: str, typ, raw: str):
    raw = raw.strip()
    try:
        if typ is int:
            value = int(raw)
        elif typ is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = raw
    except ValueError:
        raise ConfigError(key, f"expected {typ.__name__}, got {raw!r}") from None
    return value


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse config text; blank lines and ``#`` comments are ignored."""
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in overrides:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        overrides[key] = value
    return (base or RunConfig()).with_overrides(overrides)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def parse_assignments(items) -> dict[str, str]:
    """``["a.b=1", ...]`` as a dict, for ``--set`` flags."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def help_text() -> str:
    width = max(len(key) for key, *_ in SCHEMA)
    lines = ["# configuration keys (key = default  # description)"]
    for key, _, typ, default, desc in SCHEMA:
        lines.append(f"{key:<{width}} = {_format(typ(default))!s:<20} # {typ.__name__}: {desc}")
    return "\n".join(lines) + "\n"
