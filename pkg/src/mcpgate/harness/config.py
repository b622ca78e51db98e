"""Experiment configuration: YAML files with explicit unit suffixes.

Frequencies are written as ``omega/2pi`` with a unit (``"6.5 GHz"``) and
stored internally as angular frequencies in rad/s.  Times carry a unit as
well (``"35 us"``) and are stored in seconds.  A config may name a ``base``
preset; its keys are merged underneath the file's own keys.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..encodings import KINDS, EncodedQubitSpec
from ..evolution import IntegratorConfig

__all__ = [
    "ConfigError",
    "SystemSource",
    "Sweep",
    "ExperimentConfig",
    "parse_quantity",
    "load_config",
    "parse_config",
    "preset_names",
    "AXES",
]

TWO_PI = 2.0 * math.pi

_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
# times are divided by these (exact for round inputs)
_TIME_UNITS = {"s": 1.0, "ms": 1e3, "us": 1e6, "µs": 1e6, "μs": 1e6, "ns": 1e9}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([^\s\d].*?)?\s*$")

# sweep axis -> (quantity kind, display unit, display scale)
AXES = {
    "kappa_inv": ("time", "us", 1e6),
    "T": ("time", "us", 1e6),
    "delta1_over_g1": ("dimensionless", "", 1.0),
}

_TOP_KEYS = {
    "scenario", "base", "system", "schedule", "encoding", "truncation", "fast_truncation",
    "integrator", "sweep", "variants", "input", "convergence", "workers", "output", "format",
    "seed", "n_qubits", "ladder_step", "max_truncation_loss",
}
_SYSTEM_KEYS = {
    "coupler_levels", "omega_eg", "omega_fe", "omega_fg", "omega_c", "g1", "g", "g_prime",
    "crosstalk_fraction", "crosstalk", "phi", "kappa_inv", "T",
}
_ENCODING_KEYS = {"kind", "m", "coefficients", "alpha", "r", "theta"}


class ConfigError(ValueError):
    pass


def parse_quantity(value: Any, kind: str, *, allow_inf: bool = False) -> float:
    """Convert ``"6.5 GHz"`` to rad/s, ``"35 us"`` to s; bare numbers only for dimensionless."""
    if allow_inf and isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if kind == "dimensionless":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a plain number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{kind} value {value!r} needs an explicit unit")
    m = _QUANTITY.match(value)
    if not m or not m.group(2):
        raise ConfigError(f"cannot parse {kind} {value!r}; expected '<number> <unit>'")
    number, unit = float(m.group(1)), m.group(2).strip()
    table = _FREQ_UNITS if kind == "frequency" else _TIME_UNITS
    key = unit.lower() if kind == "frequency" else unit
    if key not in table:
        raise ConfigError(f"unknown {kind} unit {unit!r} in {value!r}; expected one of {sorted(table)}")
    scale = table[key]
    return number * scale * TWO_PI if kind == "frequency" else number / scale


@dataclass(frozen=True)
class SystemSource:
    """Physical inputs in SI angular units, before the schedule fixes the drive."""

    coupler_levels: int
    omega_eg: float
    omega_c: tuple[float, ...]
    g1: float
    omega_fe: float = 0.0
    omega_fg: float = 0.0
    g: str | tuple[float, ...] = "matched"
    g_prime: str | tuple[float, ...] = "equal"
    crosstalk_fraction: float | None = 0.01
    crosstalk: float | None = None
    phi: float = 0.0
    kappa_inv: float = math.inf
    T: float = math.inf


@dataclass(frozen=True)
class Sweep:
    axis: str
    values: tuple[float, ...]

    @property
    def display_unit(self) -> str:
        return AXES[self.axis][1]

    def display(self, value: float) -> float:
        return value * AXES[self.axis][2]

    @property
    def column(self) -> str:
        unit = self.display_unit
        return f"{self.axis}_{unit}" if unit else self.axis


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    system: SystemSource
    encoding: EncodedQubitSpec
    k: int = 2
    s: int = 1
    truncation: int = 8
    fast_truncation: int = 6
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    sweep: Sweep | None = None
    variants: tuple[Mapping[str, float], ...] = ()
    input: str = "uniform"
    convergence: bool = True
    workers: int = 1
    output: str | None = None
    format: str = "csv"
    seed: int = 0  # reserved: every pipeline stage is deterministic
    n_qubits: int | None = None
    ladder_step: float = 10.0
    max_truncation_loss: float = 1e-3

    def with_system(self, **changes) -> "ExperimentConfig":
        return replace(self, system=replace(self.system, **changes))

    def variant_configs(self) -> list["ExperimentConfig"]:
        """One config per variant (the cross-product axis), or just ``self``."""
        if not self.variants:
            return [self]
        return [replace(self.with_system(**v), variants=()) for v in self.variants]

    def truncation_for(self, fast: bool) -> int:
        return self.fast_truncation if fast else self.truncation


def _check_keys(section: str, data: Mapping, allowed: set[str]):
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {section!r} must be a mapping")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {section!r}")


def _merge(base: dict, over: Mapping) -> dict:
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _merge(dict(out[key]), val)
        else:
            out[key] = val
    return out


def _freq_list(values, name: str) -> tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{name} must be a non-empty list")
    return tuple(parse_quantity(v, "frequency") for v in values)


def _system_overrides(data: Mapping, section: str) -> dict:
    _check_keys(section, data, _SYSTEM_KEYS)
    out: dict[str, Any] = {}
    for key, val in data.items():
        if key in ("omega_eg", "omega_fe", "omega_fg", "g1", "crosstalk"):
            out[key] = parse_quantity(val, "frequency")
        elif key == "omega_c":
            out[key] = _freq_list(val, key)
        elif key in ("g", "g_prime"):
            if isinstance(val, str):
                if val != ("matched" if key == "g" else "equal"):
                    raise ConfigError(f"{key} must be a list of frequencies or "
                                      f"{'matched' if key == 'g' else 'equal'!r}")
                out[key] = val
            else:
                out[key] = _freq_list(val, key)
        elif key in ("kappa_inv", "T"):
            out[key] = parse_quantity(val, "time", allow_inf=True)
        elif key == "coupler_levels":
            if val not in (2, 3):
                raise ConfigError(f"coupler_levels must be 2 or 3, got {val!r}")
            out[key] = int(val)
        else:  # crosstalk_fraction, phi
            out[key] = parse_quantity(val, "dimensionless")
    return out


def _encoding(data: Mapping, n_trunc: int) -> EncodedQubitSpec:
    _check_keys("encoding", data, _ENCODING_KEYS)
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"encoding kind must be one of {KINDS}, got {kind!r}")
    kw: dict[str, Any] = {}
    if "m" in data:
        kw["m"] = int(data["m"])
    if "coefficients" in data:
        kw["coefficients"] = tuple(complex(c) for c in data["coefficients"])
    if "alpha" in data:
        kw["alpha"] = complex(data["alpha"])
    for key in ("r", "theta"):
        if key in data:
            kw[key] = parse_quantity(data[key], "dimensionless")
    return EncodedQubitSpec(kind, n_trunc=n_trunc, **kw)


def _sweep(data: Mapping) -> Sweep:
    _check_keys("sweep", data, {"axis", "values"})
    axis = data.get("axis")
    if not isinstance(axis, str):
        raise ConfigError("a run sweeps exactly one axis; 'axis' must be a single name")
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {sorted(AXES)}")
    values = data.get("values")
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("sweep values must be a non-empty list")
    kind = AXES[axis][0]
    return Sweep(axis, tuple(parse_quantity(v, kind, allow_inf=kind == "time") for v in values))


def _integrator(data: Mapping) -> IntegratorConfig:
    allowed = set(IntegratorConfig.__dataclass_fields__)
    _check_keys("integrator", data, allowed)
    kw = dict(data)
    if "dt" in kw and kw["dt"] is not None:
        kw["dt"] = parse_quantity(kw["dt"], "time")
    try:
        return IntegratorConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad integrator section: {exc}") from exc


def parse_config(raw: Mapping) -> ExperimentConfig:
    """Validate a raw mapping (already merged with its base) into an ExperimentConfig."""
    _check_keys("top level", raw, _TOP_KEYS)
    if "base" in raw:
        base = _load_raw(raw["base"])
        raw = _merge(base, {k: v for k, v in raw.items() if k != "base"})
        raw.pop("base", None)
    sysdata = dict(raw.get("system") or {})
    sysvals = _system_overrides(sysdata, "system")
    for req in ("coupler_levels", "omega_eg", "omega_c", "g1"):
        if req not in sysvals:
            raise ConfigError(f"system.{req} is required")
    if sysvals.get("coupler_levels") == 3 and "omega_fe" not in sysvals:
        raise ConfigError("a 3-level coupler needs system.omega_fe")
    if "omega_fe" in sysvals and "omega_fg" not in sysvals:
        sysvals["omega_fg"] = sysvals["omega_eg"] + sysvals["omega_fe"]
    if "crosstalk" in sysvals and "crosstalk_fraction" in sysdata:
        raise ConfigError("give either crosstalk or crosstalk_fraction, not both")
    if "crosstalk" in sysvals:
        sysvals["crosstalk_fraction"] = None
    system = SystemSource(**sysvals)

    sched = raw.get("schedule") or {}
    _check_keys("schedule", sched, {"k", "s"})
    truncation = int(raw.get("truncation", 8))
    fast_truncation = int(raw.get("fast_truncation", truncation))
    if truncation < 2 or fast_truncation < 2:
        raise ConfigError("truncation must be >= 2")
    encoding = _encoding(raw.get("encoding") or {"kind": "cat_odd", "alpha": 1.0}, truncation)

    variants = []
    for i, v in enumerate(raw.get("variants") or ()):
        variants.append(_system_overrides(v, f"variants[{i}]"))
    fmt = raw.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    inp = str(raw.get("input", "uniform"))
    if not (inp == "uniform" or re.fullmatch(r"basis:[01]+", inp)):
        raise ConfigError(f"input must be 'uniform' or 'basis:<bits>', got {inp!r}")

    return ExperimentConfig(
        scenario=str(raw.get("scenario", "custom")),
        system=system,
        encoding=encoding,
        k=int(sched.get("k", 2)),
        s=int(sched.get("s", 1)),
        truncation=truncation,
        fast_truncation=fast_truncation,
        integrator=_integrator(raw.get("integrator") or {}),
        sweep=_sweep(raw["sweep"]) if raw.get("sweep") is not None else None,
        variants=tuple(variants),
        input=inp,
        convergence=bool(raw.get("convergence", True)),
        workers=workers,
        output=raw.get("output"),
        format=fmt,
        seed=int(raw.get("seed", 0)),
        n_qubits=int(raw["n_qubits"]) if "n_qubits" in raw else None,
        ladder_step=parse_quantity(raw.get("ladder_step", 10.0), "dimensionless"),
        max_truncation_loss=float(raw.get("max_truncation_loss", 1e-3)),
    )


def preset_names() -> list[str]:
    folder = resources.files(__package__) / "presets"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".yaml"))


def _load_raw(source: str | Path) -> dict:
    path = Path(source)
    if path.suffix in (".yaml", ".yml") or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    elif str(source) in preset_names():
        text = (resources.files(__package__) / "presets" / f"{source}.yaml").read_text()
    else:
        raise ConfigError(f"{source!r} is neither a config file nor a preset ({preset_names()})")
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {source}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {source} must be a mapping")
    _check_keys("top level", data, _TOP_KEYS)
    if "base" in data:
        base = _load_raw(data.pop("base"))
        data = _merge(base, data)
    return data


def load_config(source: str | Path) -> ExperimentConfig:
    """Load a YAML file or a bundled preset by name (``table1``, ``fig6``, ...)."""
    return parse_config(_load_raw(source))
