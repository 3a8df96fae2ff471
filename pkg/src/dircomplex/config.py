"""Experiment configuration: JSON loading, defaults per subcommand, validation.

A config is a flat JSON object.  Slopes are written as numbers or ``"p/r"``
strings; integers and strings are exact, floats count as irrational.  Keys
left out fall back to the defaults of the chosen subcommand.  A manifest
written by a previous run is also accepted and re-runs that run.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from . import metrics, equicont, spectral, suspension
from .lattice import parse_slope, slope_to_json
from .systems import make_system

COMMANDS = ("span", "measure-span", "equicont", "suspend", "spectral", "sweep", "zoo-check")
WORKERS_ENV = "DIRCOMPLEX_WORKERS"

ZOO_SYSTEMS = (
    {"kind": "rotation"},
    {"kind": "skewshift"},
    {"kind": "fullshift"},
    {"kind": "permutation"},
)

_DYADIC = [1, 2, 4, 8, 16, 32]

_DEFAULTS: dict[str, dict[str, Any]] = {
    "span": {
        "families": ["bowen", "maxmean"], "mode": "topological",
        "eps_grid": [0.125, 0.25, 0.5], "k_grid": _DYADIC, "n": 1000,
    },
    "measure-span": {
        "families": ["mean", "maxmean"], "mode": "measure",
        "eps_grid": [0.125, 0.25, 0.5], "k_grid": _DYADIC, "n": 1000,
    },
    "sweep": {
        "families": ["mean"], "mode": "measure",
        "eps_grid": [0.125, 0.25, 0.5], "k_grid": _DYADIC, "n": 1000,
    },
    "equicont": {
        "families": list(equicont.FAMILIES), "eps_grid": [0.125, 0.25, 0.5],
        "k_grid": _DYADIC, "n": 300, "tau": 0.05,
    },
    "suspend": {
        "families": ["mean"], "eps_grid": sorted(suspension.CROSS_EPS),
        "k_grid": _DYADIC, "n": 1000, "bs": list(suspension.CROSS_B), "n_pairs": 1000,
    },
    "spectral": {
        "families": [], "eps_grid": sorted(spectral.SPECTRAL_EPS),
        "k_grid": list(spectral.SPECTRAL_K), "n": 400,
    },
    "zoo-check": {
        "families": ["bowen", "mean"], "betas": [0, 1, 2 ** 0.5],
        "eps_grid": [0.25, 0.5], "k_grid": [1, 2, 4, 8, 16], "n": 1000,
    },
}


class ConfigError(ValueError):
    """Raised for any invalid configuration value."""


@dataclass
class ExperimentConfig:
    command: str
    system: dict = field(default_factory=lambda: {"kind": "rotation"})
    systems: list = field(default_factory=list)
    betas: list = field(default_factory=lambda: [0])
    bs: list = field(default_factory=lambda: [1.0])
    families: list = field(default_factory=list)
    mode: str = "topological"
    eps_grid: list = field(default_factory=list)
    k_grid: list = field(default_factory=list)
    n: int = 1000
    n_pairs: int = 1000
    tau: float | None = None
    seed: int | None = 0
    exact_cap: int = 2000
    out: str = "out"
    workers: int = 1

    # keys that do not change any emitted byte
    RUNTIME_KEYS = ("out", "workers")

    def resolved(self) -> dict:
        """JSON form with every default filled in; slopes in config notation."""
        data = asdict(self)
        data["betas"] = [slope_to_json(parse_slope(b)) for b in self.betas]
        return data

    def semantic(self) -> dict:
        return {k: v for k, v in self.resolved().items() if k not in self.RUNTIME_KEYS}

    def sha256(self) -> str:
        return hashlib.sha256(canonical_json(self.semantic()).encode()).hexdigest()

    @property
    def slopes(self) -> list:
        return [parse_slope(b) for b in self.betas]


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sorted_grid(name: str, values: Any, cast) -> list:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{name} must be a nonempty list")
    try:
        out = [cast(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    if out != sorted(set(out)):
        raise ConfigError(f"{name} must be strictly increasing, got {values}")
    return out


def _check_writable(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {path!r} cannot be created: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path!r} is not writable")


def validate(cfg: ExperimentConfig, check_output: bool = True) -> ExperimentConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    if cfg.seed is None or isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int):
        raise ConfigError("seed must be present and an integer")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    cfg.k_grid = _sorted_grid("k_grid", cfg.k_grid, int)
    if cfg.k_grid[0] < 1:
        raise ConfigError("k_grid entries must be >= 1")
    cfg.eps_grid = _sorted_grid("eps_grid", cfg.eps_grid, float)
    if cfg.eps_grid[0] <= 0:
        raise ConfigError("eps_grid entries must be positive")
    cfg.bs = _sorted_grid("bs", cfg.bs, float)
    if cfg.bs[0] <= 0:
        raise ConfigError("strip half-widths must be positive")
    if not isinstance(cfg.betas, list) or not cfg.betas:
        raise ConfigError("betas must be a nonempty list")
    try:
        slopes = cfg.slopes
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"betas: {exc}") from exc
    if len(set(slopes)) != len(slopes):
        raise ConfigError("betas contains duplicates")
    if cfg.command == "sweep" and len(slopes) < 2:
        raise ConfigError("sweep needs a beta grid of at least two values")
    if cfg.mode not in ("topological", "measure"):
        raise ConfigError(f"mode must be 'topological' or 'measure', got {cfg.mode!r}")
    allowed = {
        "equicont": equicont.FAMILIES,
        "spectral": (),
        "suspend": ("mean",),
    }.get(cfg.command, metrics.FAMILIES)
    if cfg.command != "spectral" and not cfg.families:
        raise ConfigError("families must be a nonempty list")
    for fam in cfg.families:
        if fam not in allowed:
            raise ConfigError(f"family {fam!r} not available for {cfg.command}; expected one of {allowed}")
    for name in ("n", "n_pairs", "exact_cap", "workers"):
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, int) or v < (0 if name == "exact_cap" else 1):
            raise ConfigError(f"{name} must be a positive integer, got {v!r}")
    if cfg.tau is not None and not 0 < float(cfg.tau) < 1:
        raise ConfigError(f"tau must lie in (0, 1), got {cfg.tau}")
    for desc in cfg.systems or [cfg.system]:
        if not isinstance(desc, dict):
            raise ConfigError("system descriptors must be JSON objects")
        try:
            make_system(desc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"system {desc}: {exc}") from exc
    if check_output:
        _check_writable(cfg.out)
    return cfg


def load(path: str | None) -> dict:
    """Raw config mapping from a JSON file; a run manifest yields its config."""
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in data and "config_sha256" in data:
        data = dict(data["config"])
    return data


def build(command: str, raw: dict, overrides: dict) -> ExperimentConfig:
    """Merge subcommand defaults, file contents and command-line overrides."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    raw = dict(raw)
    if raw.pop("command", command) != command:
        raise ConfigError("config was written for a different subcommand")
    if "direction" in raw:
        d = raw.pop("direction")
        raw.setdefault("betas", d.get("beta"))
        raw.setdefault("bs", d.get("b", [1.0]))
    known = {f.name for f in fields(ExperimentConfig)} - {"command"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    merged = {k: v for k, v in _DEFAULTS[command].items()}
    merged.update(raw)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if command == "zoo-check":
        merged.setdefault("systems", [dict(s) for s in ZOO_SYSTEMS])
        merged.setdefault("bs", [1.0])
    merged["betas"] = [b for b in merged.get("betas", [0])]
    return ExperimentConfig(command=command, **merged)


def workers_from_env(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(WORKERS_ENV)
    if env is None or env == "":
        return 1
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
