"""Usage-rate arithmetic and calibration of the hub nest parameters.

Observed hub usage arrives by one of two routes: monthly backend counts
scaled by observation days and the service's share of hub activity, or
survey response counts expanded by a sample rate.  Either route yields
trips/day; dividing by the hub's potential demand gives the observed
proportion the model is fit to.

Calibration searches the five hub parameters (beta_hub plus one nest
constant per segment) minimizing the sum of squared gaps between
predicted and observed proportions across hubs.  The default method is
bounded Nelder-Mead with deterministic restarts; a projected
finite-difference gradient descent is available as a cross-check.  Both
are derivative-free of the caller's viewpoint, fully deterministic, and
respect box bounds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import Bounds, minimize

from .choice import SEGMENTS, Mode, Segment
from .config import OptimizerSettings
from .hubs import HubChoiceSetup

N_PARAMS = 1 + len(SEGMENTS)


@dataclass(frozen=True)
class HubParams:
    """Calibrated nest parameters: one nesting coefficient shared by all
    hubs and one hub constant per population segment."""

    beta_hub: float
    asc_by_segment: Mapping[Segment, float]

    def __post_init__(self) -> None:
        if not 0.0 < self.beta_hub <= 1.0:
            raise ValueError(f"invalid nesting coefficient: {self.beta_hub}")
        missing = [s.value for s in SEGMENTS if s not in self.asc_by_segment]
        if missing:
            raise ValueError(f"missing segment constants: {missing}")
        for seg in SEGMENTS:
            if not math.isfinite(self.asc_by_segment[seg]):
                raise ValueError(f"invalid attribute: non-finite constant for {seg.value}")

    def as_vector(self) -> np.ndarray:
        return np.array([self.beta_hub] + [self.asc_by_segment[s] for s in SEGMENTS], dtype=float)

    @classmethod
    def from_vector(cls, x) -> "HubParams":
        x = np.asarray(x, dtype=float)
        return cls(beta_hub=float(x[0]), asc_by_segment={s: float(x[1 + i]) for i, s in enumerate(SEGMENTS)})


@dataclass(frozen=True)
class ObservedUsage:
    """Observed usage of one hub, normalized to trips/day and to a
    proportion of potential demand."""

    hub_id: str
    observed_trips_per_day: float
    potential_trips_per_day: float
    observed_proportion: float
    sample_rate: float | None = None

    def __post_init__(self) -> None:
        if self.potential_trips_per_day <= 0.0:
            raise ValueError(f"hub {self.hub_id}: potential demand must be positive")
        if self.observed_trips_per_day < 0.0:
            raise ValueError(f"hub {self.hub_id}: observed trips must be non-negative")
        expected = self.observed_trips_per_day / self.potential_trips_per_day
        if not math.isclose(self.observed_proportion, expected, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError(f"hub {self.hub_id}: proportion inconsistent with trips and potential demand")


def derive_observed_rate(
    backend_trips_per_month: float,
    days_per_month: float,
    service_share: float,
    potential_trips: float,
    hub_id: str = "",
) -> ObservedUsage:
    """Observed usage from backend counts of one service.

    trips/day = backend / (days * share); the share is the fraction of all
    hub trips the counted service represents.
    """
    if backend_trips_per_month < 0:
        raise ValueError("backend trips must be non-negative")
    if days_per_month <= 0:
        raise ValueError("days_per_month must be positive")
    if not 0.0 < service_share <= 1.0:
        raise ValueError(f"service share must be in (0, 1], got {service_share}")
    trips_day = backend_trips_per_month / (days_per_month * service_share)
    return ObservedUsage(
        hub_id=hub_id,
        observed_trips_per_day=trips_day,
        potential_trips_per_day=potential_trips,
        observed_proportion=trips_day / potential_trips,
    )


def derive_sample_rate(survey_responses: float, trips_per_day: float, survey_days: float) -> float:
    """Fraction of hub trips the intercept survey captured."""
    if survey_responses < 0:
        raise ValueError("survey responses must be non-negative")
    if trips_per_day <= 0 or survey_days <= 0:
        raise ValueError("trips_per_day and survey_days must be positive")
    return survey_responses / (trips_per_day * survey_days)


def infer_trips_from_sample(
    survey_responses: float,
    survey_days: float,
    sample_rate: float,
    potential_trips: float,
    hub_id: str = "",
) -> ObservedUsage:
    """Observed usage expanded from survey counts at a known sample rate."""
    if survey_responses < 0:
        raise ValueError("survey responses must be non-negative")
    if survey_days <= 0:
        raise ValueError("survey_days must be positive")
    if sample_rate <= 0:
        raise ValueError(f"sample rate must be positive, got {sample_rate}")
    trips_day = survey_responses / (survey_days * sample_rate)
    return ObservedUsage(
        hub_id=hub_id,
        observed_trips_per_day=trips_day,
        potential_trips_per_day=potential_trips,
        observed_proportion=trips_day / potential_trips,
        sample_rate=sample_rate,
    )


def predict_hub_proportion(setup: HubChoiceSetup, params: HubParams) -> float:
    """Trip-weighted mean upper-level hub share over the potential markets."""
    total = setup.trips.sum()
    if setup.n_markets == 0 or total <= 0.0:
        raise ValueError(f"hub {setup.hub.id}: no potential trips to predict over")
    return float((setup.trips * setup.hub_nest_share(params)).sum() / total)


@dataclass(frozen=True)
class HubFit:
    hub_id: str
    observed: float
    predicted: float


@dataclass(frozen=True)
class CalibrationResult:
    params: HubParams
    objective: float
    converged: bool
    rank_deficient: bool
    method: str
    n_evaluations: int
    trace: tuple[float, ...]
    per_hub: tuple[HubFit, ...]


def _default_bounds(settings: OptimizerSettings) -> list[tuple[float, float]]:
    return [settings.beta_bounds] + [settings.asc_bounds] * len(SEGMENTS)


def calibrate(
    observed: Sequence[ObservedUsage],
    setups: Mapping[str, HubChoiceSetup],
    *,
    init: HubParams | None = None,
    bounds: Sequence[tuple[float, float]] | None = None,
    settings: OptimizerSettings | None = None,
) -> CalibrationResult:
    """Fit beta_hub and the segment constants to observed hub proportions.

    Fewer observations than parameters leaves the fit rank-deficient; a
    RuntimeWarning is emitted and the flag is set on the result, but the
    best-fit point is still returned.  The trace records best-so-far
    objective values (accepted improvements), so it is non-increasing.
    """
    settings = settings or OptimizerSettings()
    obs = sorted(observed, key=lambda o: o.hub_id)
    if not obs:
        raise ValueError("no observations to calibrate against")
    seen = set()
    for o in obs:
        if o.hub_id in seen:
            raise ValueError(f"duplicate observation for hub {o.hub_id}")
        seen.add(o.hub_id)
    pairs = []
    for o in obs:
        setup = setups.get(o.hub_id)
        if setup is None:
            raise ValueError(f"no prepared markets for observed hub {o.hub_id}")
        pairs.append((setup, o.observed_proportion))

    rank_deficient = len(pairs) < N_PARAMS
    if rank_deficient:
        warnings.warn(
            f"calibration under-determined: {len(pairs)} observation(s) for {N_PARAMS} parameters",
            RuntimeWarning,
            stacklevel=2,
        )

    box = list(bounds) if bounds is not None else _default_bounds(settings)
    if len(box) != N_PARAMS:
        raise ValueError(f"expected {N_PARAMS} bound pairs, got {len(box)}")
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    if (lo > hi).any():
        raise ValueError("lower bound exceeds upper bound")

    if init is not None:
        x0 = init.as_vector()
    else:
        x0 = np.array([settings.init_beta] + [settings.init_asc] * len(SEGMENTS), dtype=float)
    x0 = np.clip(x0, lo, hi)
    ridge = settings.ridge_weight
    x_ref = x0.copy()

    trace: list[float] = []
    best = {"x": x0.copy(), "f": np.inf}
    n_eval = 0

    def objective(x: np.ndarray) -> float:
        nonlocal n_eval
        n_eval += 1
        x = np.clip(x, lo, hi)
        params = HubParams.from_vector(x)
        f = 0.0
        for setup, target in pairs:
            f += (predict_hub_proportion(setup, params) - target) ** 2
        if ridge > 0.0:
            f += ridge * float(((x - x_ref) ** 2).sum())
        if f < best["f"]:
            best["f"] = f
            best["x"] = x.copy()
            trace.append(f)
        return f

    converged = False
    if settings.method == "nelder-mead":
        x = x0
        for _ in range(settings.restarts + 1):
            res = minimize(
                objective,
                x,
                method="Nelder-Mead",
                bounds=Bounds(lo, hi),
                options={
                    "maxiter": settings.max_iter,
                    "fatol": settings.objective_tol,
                    "xatol": settings.simplex_tol,
                    "adaptive": True,
                },
            )
            x = np.clip(res.x, lo, hi)
            converged = bool(res.success) or best["f"] <= settings.objective_tol
            if best["f"] <= settings.objective_tol:
                break
    elif settings.method == "projected-gradient":
        converged = _projected_gradient(objective, best, lo, hi, settings)
    else:
        raise ValueError(f"unknown optimizer method: {settings.method!r}")

    params = HubParams.from_vector(best["x"])
    per_hub = tuple(
        HubFit(hub_id=o.hub_id, observed=o.observed_proportion, predicted=predict_hub_proportion(setup, params))
        for (setup, _), o in zip(pairs, obs)
    )
    if not converged:
        warnings.warn("calibration did not converge; returning best point found", RuntimeWarning, stacklevel=2)
    return CalibrationResult(
        params=params,
        objective=float(best["f"]),
        converged=converged,
        rank_deficient=rank_deficient,
        method=settings.method,
        n_evaluations=n_eval,
        trace=tuple(trace),
        per_hub=per_hub,
    )


def _projected_gradient(objective, best, lo, hi, settings: OptimizerSettings) -> bool:
    """Forward-difference gradient descent projected onto the box."""
    x = best["x"].copy()
    f = objective(x)
    for _ in range(settings.max_iter):
        if f <= settings.objective_tol:
            return True
        g = np.zeros_like(x)
        for i in range(len(x)):
            h = 1e-7 * (1.0 + abs(x[i]))
            xp = x.copy()
            xp[i] = min(x[i] + h, hi[i])
            step = xp[i] - x[i]
            if step == 0.0:  # pinned at the upper bound, probe downward
                xp[i] = max(x[i] - h, lo[i])
                step = xp[i] - x[i]
                if step == 0.0:
                    continue
            g[i] = (objective(xp) - f) / step
        gnorm = float(np.linalg.norm(g))
        if gnorm < 1e-14:
            return True
        alpha = 1.0 / max(1.0, gnorm)
        improved = False
        while alpha > 1e-18:
            xn = np.clip(x - alpha * g, lo, hi)
            fn = objective(xn)
            if fn < f:
                x, f = xn, fn
                improved = True
                break
            alpha /= 2.0
        if not improved:
            return f <= settings.objective_tol
    return best["f"] <= settings.objective_tol


def percent_difference(predicted: float, observed: float) -> float | None:
    """(predicted - observed) / observed as a percentage; None when the
    observed count is zero."""
    if observed == 0.0:
        return None
    return 100.0 * (predicted - observed) / observed


@dataclass(frozen=True)
class LegCountRow:
    """Predicted vs observed daily bus boardings in one direction."""

    direction: str
    predicted: float
    observed: float
    percent_diff: float | None
    absolute_gap: float


def validate_leg_counts(
    setup: HubChoiceSetup,
    params: HubParams,
    observed_counts: Mapping[str, float],
    *,
    unimodal_boardings: Mapping[str, float] | None = None,
    literal_lower_branch: bool = False,
) -> list[LegCountRow]:
    """Compare modeled daily bus boardings at the hub with ground truth.

    Pick-up counts board a bus leaving the hub (exit legs); drop-off
    counts arrive by bus (entry legs).  ``unimodal_boardings`` adds
    unimodal-transit boardings at the hub stop when a count for them is
    available.  Zero observed counts report the absolute gap and a None
    percent difference.
    """
    shares = setup.choice_shares(params, literal_lower_branch=literal_lower_branch)
    joint_trips = setup.trips[:, None] * shares.joint
    rows = []
    for direction in sorted(observed_counts):
        if direction == "pickup":
            mask = np.array([c.exit == Mode.BUS for c in setup.combos], dtype=bool)
        elif direction == "dropoff":
            mask = np.array([c.entry == Mode.BUS for c in setup.combos], dtype=bool)
        else:
            raise ValueError(f"unknown direction: {direction!r}")
        predicted = float(joint_trips[:, mask].sum()) if setup.n_combos else 0.0
        if unimodal_boardings:
            predicted += float(unimodal_boardings.get(direction, 0.0))
        obs = float(observed_counts[direction])
        rows.append(
            LegCountRow(
                direction=direction,
                predicted=predicted,
                observed=obs,
                percent_diff=percent_difference(predicted, obs),
                absolute_gap=predicted - obs,
            )
        )
    return rows
