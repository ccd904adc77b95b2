"""Experiment configuration: flat JSON objects with dotted keys.

Every knob has a default in ``DEFAULTS``. Keys under ``domain.`` other than
``domain.name`` are passed to the catalog builder as parameters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from dataclasses import field as dc_field
from typing import Any, Dict, Optional

from .errors import ConfigError

OPERATIONS = (
    "acceptance",
    "domain.verify", "domain.segment-check", "domain.translation-check",
    "special-fn.table",
    "approx.build", "approx.check",
    "exhaustion.build", "exhaustion.eval", "exhaustion.check-bounds",
    "exhaustion.check-levi", "exhaustion.trace",
    "figures.cusp_fig1", "figures.exhaustion_profile", "figures.error_vs_nu",
)

DEFAULTS: Dict[str, Any] = {
    "operation": "acceptance",
    "domain.name": "loglip",
    "field.name": "re_z1",
    "numeric.seed": 0,
    "numeric.nu": 1e-3,
    "numeric.samples": 10000,
    "numeric.boundary_samples": 200,
    "numeric.psh_points": 400,
    "numeric.eps_points": 20,
    "numeric.points_per_patch": 20,
    "numeric.nu_halvings": 5,
    "numeric.h": 1e-4,
    "numeric.levi_samples": 100,
    "numeric.attain_samples": 100,
    "numeric.ray_k_min": 3,
    "numeric.ray_k_max": 20,
    "numeric.criteria": None,
    "special.form": "loglip",
    "special.C": 1.0,
    "special.C_tilde": 1.0,
    "special.exponent": 0.5,
    "special.eps1": 0.1,
    "special.eps_min": 1e-10,
    "special.eps_max": 0.09,
    "special.rows": 50,
    "exhaustion.eps0": None,
    "exhaustion.rho": 0.9,
    "exhaustion.grid_floor": 1e-10,
    "exhaustion.gamma": None,
    "exhaustion.lambda_constant": None,
    "exhaustion.points_file": None,
    "exhaustion.point": None,
    "output.dir": None,
    "output.format": "json",
}

_POSITIVE = ("numeric.nu", "numeric.h", "special.C", "special.C_tilde", "special.eps_min",
             "special.eps_max", "exhaustion.grid_floor")
_COUNTS = ("numeric.samples", "numeric.boundary_samples", "numeric.psh_points",
           "numeric.eps_points", "numeric.points_per_patch", "numeric.levi_samples",
           "numeric.attain_samples", "special.rows")


@dataclass(frozen=True)
class ExperimentConfig:
    operation: str = "acceptance"
    domain: Dict[str, Any] = dc_field(default_factory=lambda: {"name": "loglip"})
    field: Dict[str, Any] = dc_field(default_factory=lambda: {"name": "re_z1"})
    numeric: Dict[str, Any] = dc_field(default_factory=dict)
    special: Dict[str, Any] = dc_field(default_factory=dict)
    exhaustion: Dict[str, Any] = dc_field(default_factory=dict)
    output: Dict[str, Any] = dc_field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.numeric["seed"])

    def domain_params(self) -> Dict[str, Any]:
        return {k: v for k, v in self.domain.items() if k != "name"}

    def echo(self) -> Dict[str, Any]:
        """The flat form, output settings excluded (they do not change results)."""
        flat = {"operation": self.operation}
        for sec in ("domain", "field", "numeric", "special", "exhaustion"):
            for k, v in getattr(self, sec).items():
                flat[f"{sec}.{k}"] = v
        return dict(sorted(flat.items()))


def _where(key: str, text: Optional[str]) -> str:
    if text is None:
        return ""
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return f" (line {i})"
    return ""


def parse_config(flat: Dict[str, Any], text: Optional[str] = None) -> ExperimentConfig:
    """Validate a flat dotted-key mapping against ``DEFAULTS``."""
    if not isinstance(flat, dict):
        raise ConfigError("config must be a JSON object")
    merged = dict(DEFAULTS)
    for key, val in flat.items():
        if key not in DEFAULTS and not (key.startswith("domain.") and key != "domain."):
            raise ConfigError(f"unknown config key {key!r}{_where(key, text)}")
        merged[key] = val
    op = merged["operation"]
    if op not in OPERATIONS:
        raise ConfigError(f"unknown operation {op!r}{_where('operation', text)}; "
                          f"known: {', '.join(OPERATIONS)}")
    for key in _POSITIVE:
        v = merged[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ConfigError(f"{key} must be a positive number, got {v!r}{_where(key, text)}")
    for key in _COUNTS:
        v = merged[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{key} must be a positive integer, got {v!r}{_where(key, text)}")
    seed = merged["numeric.seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"numeric.seed must be a non-negative integer{_where('numeric.seed', text)}")
    if not 0 < merged["exhaustion.rho"] < 1:
        raise ConfigError(f"exhaustion.rho must lie in (0, 1){_where('exhaustion.rho', text)}")
    if merged["output.format"] not in ("json", "csv"):
        raise ConfigError(f"output.format must be json or csv{_where('output.format', text)}")
    crit = merged["numeric.criteria"]
    if crit is not None:
        if not isinstance(crit, list) or not all(isinstance(c, int) and 1 <= c <= 9 for c in crit):
            raise ConfigError(f"numeric.criteria must be a list of integers in 1..9"
                              f"{_where('numeric.criteria', text)}")
    sections: Dict[str, Dict[str, Any]] = {s: {} for s in
                                           ("domain", "field", "numeric", "special", "exhaustion", "output")}
    for key, val in merged.items():
        if key == "operation":
            continue
        sec, name = key.split(".", 1)
        sections[sec][name] = val
    return ExperimentConfig(operation=op, **sections)


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not text.strip():
        return parse_config({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(data, text)


def with_overrides(cfg: ExperimentConfig, overrides: Dict[str, Any]) -> ExperimentConfig:
    """A new config with dotted-key overrides (``None`` values are ignored)."""
    base = {"operation": cfg.operation}
    for sec in ("domain", "field", "numeric", "special", "exhaustion", "output"):
        for k, v in getattr(cfg, sec).items():
            base[f"{sec}.{k}"] = v
    base.update({k: v for k, v in overrides.items() if v is not None})
    return parse_config(base)
