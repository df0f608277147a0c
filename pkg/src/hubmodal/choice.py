"""Market-level mode choice with a single multimodal hub nest.

Each market is one (population segment, OD pair) demand cell with its own
taste coefficients and mode attributes.  Base choice is multinomial logit
over the unimodal modes.  Introducing a hub adds one nest whose
alternatives are entry/exit leg combinations; the nest enters the upper
level through its logsum utility

    V_hub = beta_hub * ln(sum_c exp(V_c / beta_hub)) + asc_segment

and the within-nest split is logit over the scaled combo utilities.  A
``literal_lower_branch`` switch reproduces a variant where the within-nest
split uses the raw utilities instead (upper level unchanged, so calibrated
parameters are identical under both).

Utilities are linear in time and cost.  There are three coefficient
families (auto, transit, non-vehicle); every mode, including hub leg
modes, maps to exactly one family plus a mode constant.  Carpool is the
zero-constant reference mode.  All softmax and logsum computations use
max-subtraction and are stable for utilities anywhere in [-700, 700].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Mapping, NamedTuple, Sequence

import numpy as np

from .geo import GeoPoint

if TYPE_CHECKING:
    from .calibration import HubParams
    from .hubs import Hub


class Segment(str, Enum):
    """Population segments; each gets its own hub nest constant."""

    NOT_LOW_INCOME = "not_low_income"
    LOW_INCOME = "low_income"
    SENIOR = "senior"
    STUDENT = "student"


# Canonical segment order; vector layouts and reports follow it.
SEGMENTS: tuple[Segment, ...] = tuple(Segment)


class Mode(str, Enum):
    # unimodal trip modes
    DRIVING = "driving"
    TRANSIT = "transit"
    ON_DEMAND_AUTO = "on_demand_auto"
    BIKING = "biking"
    WALKING = "walking"
    CARPOOL = "carpool"
    # hub transfer leg modes
    BUS = "bus"
    CAR = "car"
    CAR_SHARE = "car_share"
    BIKE_SHARE = "bike_share"
    WALK_LEG = "walk"


MAIN_MODES: tuple[Mode, ...] = (
    Mode.DRIVING,
    Mode.TRANSIT,
    Mode.ON_DEMAND_AUTO,
    Mode.BIKING,
    Mode.WALKING,
    Mode.CARPOOL,
)
LEG_MODES: tuple[Mode, ...] = (Mode.BUS, Mode.CAR, Mode.CAR_SHARE, Mode.BIKE_SHARE, Mode.WALK_LEG)

_AUTO = "auto"
_TRANSIT = "transit"
_NONVEH = "nonvehicle"

# Coefficient family and constant field for every mode.  Leg modes reuse
# the family of the unimodal mode they stand in for.
MODE_FAMILY: dict[Mode, tuple[str, str | None]] = {
    Mode.DRIVING: (_AUTO, "asc_driving"),
    Mode.TRANSIT: (_TRANSIT, "asc_transit"),
    Mode.ON_DEMAND_AUTO: (_AUTO, "asc_ondemand"),
    Mode.BIKING: (_NONVEH, "asc_biking"),
    Mode.WALKING: (_NONVEH, "asc_walking"),
    Mode.CARPOOL: (_AUTO, None),
    Mode.BUS: (_TRANSIT, "asc_transit"),
    Mode.CAR: (_AUTO, "asc_driving"),
    Mode.CAR_SHARE: (_AUTO, "asc_driving"),
    Mode.BIKE_SHARE: (_NONVEH, "asc_biking"),
    Mode.WALK_LEG: (_NONVEH, "asc_walking"),
}

TASTE_FIELDS: tuple[str, ...] = (
    "beta_auto_tt",
    "beta_trans_ivt",
    "beta_trans_at",
    "beta_trans_et",
    "beta_trans_n",
    "beta_nonveh_tt",
    "beta_cost",
    "asc_driving",
    "asc_transit",
    "asc_ondemand",
    "asc_biking",
    "asc_walking",
)


@dataclass(frozen=True)
class TasteVector:
    """Per-market utility coefficients.

    Time coefficients are per minute, beta_cost per dollar.  Carpool is the
    reference mode and has no constant.  All fields must be finite; the
    beta_cost < 0 requirement is enforced at ingestion and by the
    operations that divide by it, so synthetic vectors with beta_cost = 0
    remain constructible for utility-only arithmetic.
    """

    beta_auto_tt: float = 0.0
    beta_trans_ivt: float = 0.0
    beta_trans_at: float = 0.0
    beta_trans_et: float = 0.0
    beta_trans_n: float = 0.0
    beta_nonveh_tt: float = 0.0
    beta_cost: float = 0.0
    asc_driving: float = 0.0
    asc_transit: float = 0.0
    asc_ondemand: float = 0.0
    asc_biking: float = 0.0
    asc_walking: float = 0.0

    def __post_init__(self) -> None:
        for name in TASTE_FIELDS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"invalid attribute: non-finite {name}")


@dataclass(frozen=True)
class ModeAttr:
    """Level-of-service attributes of one mode for one market."""

    ivt_min: float = 0.0
    access_min: float = 0.0
    egress_min: float = 0.0
    transfers: float = 0.0
    cost_usd: float = 0.0
    available: bool = True


class ComboId(NamedTuple):
    """Entry and exit leg modes of one hub transfer alternative."""

    entry: Mode
    exit: Mode

    def label(self) -> str:
        return f"{self.entry.value}+{self.exit.value}"


def combo_sort_key(combo: ComboId) -> tuple[str, str]:
    return (combo.entry.value, combo.exit.value)


@dataclass(frozen=True)
class Market:
    """One (segment, OD pair) demand cell.

    ``attrs`` maps unimodal modes to their level-of-service attributes;
    modes absent from the mapping are unavailable.  ``o_zone``/``d_zone``
    key the leg travel-time matrices and default to ``<od_id>/o`` and
    ``<od_id>/d``.
    """

    od_id: str
    segment: Segment
    origin: GeoPoint
    destination: GeoPoint
    trips_per_day: float
    driving_miles: float
    attrs: Mapping[Mode, ModeAttr]
    taste: TasteVector
    o_zone: str = ""
    d_zone: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.trips_per_day) and self.trips_per_day >= 0.0):
            raise ValueError(f"market {self.od_id}: trips_per_day must be non-negative")
        if not any(a.available for a in self.attrs.values()):
            raise ValueError(f"market {self.od_id}: needs at least one available mode")
        if not self.o_zone:
            object.__setattr__(self, "o_zone", f"{self.od_id}/o")
        if not self.d_zone:
            object.__setattr__(self, "d_zone", f"{self.od_id}/d")

    @property
    def market_id(self) -> str:
        return f"{self.od_id}|{self.segment.value}"


def _coef(taste, name: str):
    if isinstance(taste, TasteVector):
        return getattr(taste, name)
    return taste[name]


def mode_utility(taste, mode: Mode, *, ivt_min=0.0, access_min=0.0, egress_min=0.0, transfers=0.0, cost_usd=0.0):
    """Family utility formula; elementwise over scalars or numpy arrays.

    ``taste`` is a TasteVector or a mapping of coefficient name to array.
    Only the attributes the mode's family uses enter the sum; every family
    adds beta_cost * cost plus the mode constant.
    """
    family, asc = MODE_FAMILY[mode]
    if family == _AUTO:
        v = _coef(taste, "beta_auto_tt") * ivt_min
    elif family == _TRANSIT:
        v = (
            _coef(taste, "beta_trans_ivt") * ivt_min
            + _coef(taste, "beta_trans_at") * access_min
            + _coef(taste, "beta_trans_et") * egress_min
            + _coef(taste, "beta_trans_n") * transfers
        )
    else:
        v = _coef(taste, "beta_nonveh_tt") * ivt_min
    v = v + _coef(taste, "beta_cost") * cost_usd
    if asc is not None:
        v = v + _coef(taste, asc)
    return v


def systematic_utility(taste: TasteVector, attrs: ModeAttr, mode: Mode) -> float:
    """Systematic utility of one mode for one market.

    Raises ValueError when the mode is unavailable or any attribute is
    non-finite.
    """
    if not attrs.available:
        raise ValueError(f"mode unavailable: {mode.value}")
    for name in ("ivt_min", "access_min", "egress_min", "transfers", "cost_usd"):
        if not math.isfinite(getattr(attrs, name)):
            raise ValueError(f"invalid attribute: non-finite {name} for {mode.value}")
    return float(
        mode_utility(
            taste,
            mode,
            ivt_min=attrs.ivt_min,
            access_min=attrs.access_min,
            egress_min=attrs.egress_min,
            transfers=attrs.transfers,
            cost_usd=attrs.cost_usd,
        )
    )


def mnl_shares(utilities) -> np.ndarray:
    """Multinomial logit shares of a utility vector.

    Max-subtraction keeps the exponentials in range; the result is
    renormalized once after the softmax so shares sum to one within
    floating-point error.
    """
    v = np.asarray(utilities, dtype=float)
    if v.ndim != 1:
        raise ValueError("utilities must be a flat vector")
    if v.size == 0:
        raise ValueError("empty choice set")
    if np.isnan(v).any() or np.isposinf(v).any():
        raise ValueError("invalid utility: NaN or +inf")
    m = v.max()
    if not np.isfinite(m):
        raise ValueError("no finite utility in choice set")
    e = np.exp(v - m)
    s = e / e.sum()
    return s / s.sum()


def combo_utility(market: Market, hub: "Hub | None", combo: ComboId, leg_attrs: tuple[ModeAttr, ModeAttr]) -> float:
    """Utility of one transfer combination: entry leg plus exit leg.

    Each leg is priced with the coefficient family of its leg mode.  The
    combo must belong to the hub's choice set (when a hub is given) and
    both legs must be available.
    """
    if hub is not None and combo not in hub.combos:
        raise ValueError(f"combo unavailable: {combo.label()} not offered at hub {hub.id}")
    entry_attrs, exit_attrs = leg_attrs
    if not (entry_attrs.available and exit_attrs.available):
        raise ValueError(f"combo unavailable: missing leg data for {combo.label()}")
    return systematic_utility(market.taste, entry_attrs, combo.entry) + systematic_utility(
        market.taste, exit_attrs, combo.exit
    )


def nest_logsum(combo_utilities, beta_hub: float, asc_hub: float = 0.0) -> float:
    """Nest utility beta_hub * ln(sum exp(V / beta_hub)) + asc_hub.

    Utilities are summed in sorted order so the result is exactly
    invariant under permutation of the combo list.
    """
    if not 0.0 < beta_hub <= 1.0:
        raise ValueError(f"invalid nesting coefficient: {beta_hub}")
    v = np.sort(np.asarray(list(combo_utilities), dtype=float))
    if v.size == 0:
        raise ValueError("empty nest")
    if np.isnan(v).any() or np.isposinf(v).any():
        raise ValueError("invalid utility: NaN or +inf")
    m = v[-1]
    if not np.isfinite(m):
        raise ValueError("no finite utility in nest")
    return float(m + beta_hub * np.log(np.exp((v - m) / beta_hub).sum()) + asc_hub)


@dataclass(frozen=True)
class NestedShares:
    """Upper-level shares over unimodal modes plus the hub nest, and the
    within-nest conditional shares."""

    upper: dict[Mode, float]
    hub_share: float
    lower: dict[ComboId, float]

    def joint(self, combo: ComboId) -> float:
        """Unconditional probability of one transfer combination."""
        return self.hub_share * self.lower[combo]


def nested_shares(
    unimodal_utilities: Mapping[Mode, float],
    combo_utilities: Mapping[ComboId, float],
    params: "HubParams",
    segment: Segment,
    *,
    literal_lower_branch: bool = False,
) -> NestedShares:
    """Two-level choice shares for one market.

    The hub nest competes with the unimodal modes through its logsum
    utility.  With an empty combo set the hub share is zero and the upper
    level reduces to plain MNL over the unimodal modes.  At beta_hub = 1
    and a zero constant the joint combo probabilities collapse to flat MNL
    over the pooled choice set.
    """
    if not unimodal_utilities:
        raise ValueError("empty choice set")
    modes = sorted(unimodal_utilities, key=lambda m: m.value)
    uni = [unimodal_utilities[m] for m in modes]
    if not combo_utilities:
        shares = mnl_shares(uni)
        return NestedShares(upper=dict(zip(modes, shares)), hub_share=0.0, lower={})

    combos = sorted(combo_utilities, key=combo_sort_key)
    cu = [combo_utilities[c] for c in combos]
    v_hub = nest_logsum(cu, params.beta_hub, params.asc_by_segment[segment])
    all_shares = mnl_shares(uni + [v_hub])
    scale = 1.0 if literal_lower_branch else params.beta_hub
    lower = mnl_shares([v / scale for v in cu])
    return NestedShares(
        upper=dict(zip(modes, all_shares[: len(modes)])),
        hub_share=float(all_shares[-1]),
        lower=dict(zip(combos, lower)),
    )


def value_of_time(taste: TasteVector) -> float:
    """Implied value of auto travel time in dollars per hour.

    VOT = 60 * beta_auto_tt / beta_cost; positive when both coefficients
    are negative.  Raises ValueError when beta_cost is not negative.
    """
    if not taste.beta_cost < 0.0:
        raise ValueError(f"value of time undefined: beta_cost must be negative, got {taste.beta_cost}")
    return 60.0 * taste.beta_auto_tt / taste.beta_cost
