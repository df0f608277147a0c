"""Run configuration and input manifest.

Both are plain dataclasses loadable from JSON.  Unknown keys are errors,
so typos in a config file fail loudly instead of silently running with
defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .geo import CONDITION2_MODES

OPTIMIZER_METHODS = ("nelder-mead", "projected-gradient")


@dataclass
class OptimizerSettings:
    """Calibration optimizer knobs.

    Defaults: bounded Nelder-Mead started at beta_hub = 0.5 and all nest
    constants at -5, with beta_hub in [0.01, 1] and constants in [-12, 0].
    Convergence: objective below objective_tol or simplex spread below
    simplex_tol.  ridge_weight adds an L2 pull toward the start point for
    under-determined fits (off by default).
    """

    method: str = "nelder-mead"
    beta_bounds: tuple[float, float] = (0.01, 1.0)
    asc_bounds: tuple[float, float] = (-12.0, 0.0)
    init_beta: float = 0.5
    init_asc: float = -5.0
    max_iter: int = 4000
    objective_tol: float = 1e-12
    simplex_tol: float = 1e-10
    restarts: int = 3
    ridge_weight: float = 0.0

    def __post_init__(self) -> None:
        if self.method not in OPTIMIZER_METHODS:
            raise ValueError(f"unknown optimizer method: {self.method!r}")
        if isinstance(self.beta_bounds, list):
            self.beta_bounds = tuple(self.beta_bounds)
        if isinstance(self.asc_bounds, list):
            self.asc_bounds = tuple(self.asc_bounds)
        if self.max_iter < 1 or self.restarts < 0:
            raise ValueError("max_iter must be >= 1 and restarts >= 0")
        if self.objective_tol <= 0 or self.simplex_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.ridge_weight < 0:
            raise ValueError("ridge_weight must be non-negative")


@dataclass
class PipelineConfig:
    """Cross-cutting run options with documented defaults."""

    # detour threshold: None derives the nearest-rank 90th percentile from
    # the survey; a number pins it
    threshold_override: float | None = None
    # short final-leg inclusion rule and its distance constant (km)
    condition2_mode: str = "literal_hd_1km"
    condition2_km: float = 1.0
    # within-nest split on raw utilities instead of the consistent scaled form
    literal_lower_branch: bool = False
    # emissions and annualization
    grams_co2_per_mile: float = 400.0
    days_per_year: float = 365.0
    # leg distance fallback and car out-of-pocket cost
    circuity_factor: float = 1.3
    car_cost_per_mile: float = 0.20
    # count on-demand auto into the driving VMT category
    include_on_demand_auto_vmt: bool = False
    # worker threads for candidate evaluation (0 means use the env default)
    threads: int = 0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self) -> None:
        if self.condition2_mode not in CONDITION2_MODES:
            raise ValueError(f"unknown condition2_mode: {self.condition2_mode!r}")
        if self.threshold_override is not None and not self.threshold_override >= 1.0:
            raise ValueError("threshold_override must be >= 1")
        if self.condition2_km < 0:
            raise ValueError("condition2_km must be non-negative")
        for name in ("grams_co2_per_mile", "days_per_year", "circuity_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.car_cost_per_mile < 0:
            raise ValueError("car_cost_per_mile must be non-negative")
        if self.threads < 0:
            raise ValueError("threads must be non-negative")
        if isinstance(self.optimizer, dict):
            self.optimizer = _settings_from_dict(self.optimizer)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["optimizer"]["beta_bounds"] = list(self.optimizer.beta_bounds)
        out["optimizer"]["asc_bounds"] = list(self.optimizer.asc_bounds)
        return out


def _settings_from_dict(data: dict) -> OptimizerSettings:
    known = {f.name for f in fields(OptimizerSettings)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown optimizer keys: {unknown}")
    return OptimizerSettings(**data)


_MANIFEST_KEYS = (
    "markets",
    "taste_parameters",
    "leg_matrices",
    "fares",
    "stops",
    "pr_lots",
    "survey",
    "observed_usage",
)


@dataclass
class Manifest:
    """Named input file paths, resolved relative to the manifest file."""

    markets: Path | None = None
    taste_parameters: Path | None = None
    leg_matrices: tuple[Path, ...] = ()
    fares: Path | None = None
    stops: Path | None = None
    pr_lots: Path | None = None
    survey: Path | None = None
    observed_usage: Path | None = None

    @classmethod
    def from_json(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: manifest must be a JSON object")
        unknown = sorted(set(data) - set(_MANIFEST_KEYS))
        if unknown:
            raise ValueError(f"{path}: unknown manifest keys: {unknown}")
        base = path.parent

        def _resolve(value):
            if value is None:
                return None
            p = base / value
            if not p.exists():
                raise ValueError(f"{path}: referenced file does not exist: {value}")
            return p

        matrices = data.get("leg_matrices") or []
        if isinstance(matrices, str):
            matrices = [matrices]
        return cls(
            markets=_resolve(data.get("markets")),
            taste_parameters=_resolve(data.get("taste_parameters")),
            leg_matrices=tuple(_resolve(p) for p in matrices),
            fares=_resolve(data.get("fares")),
            stops=_resolve(data.get("stops")),
            pr_lots=_resolve(data.get("pr_lots")),
            survey=_resolve(data.get("survey")),
            observed_usage=_resolve(data.get("observed_usage")),
        )

    def require(self, *names: str) -> None:
        missing = [n for n in names if not getattr(self, n)]
        if missing:
            raise ValueError(f"manifest is missing required entries: {missing}")
