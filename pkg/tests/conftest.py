"""Shared builders for the test suite.

Markets, hubs, and matrices here are deliberately tiny and fully
specified, so tests can hand-compute the expected numbers.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from hubmodal import (
    ComboId,
    FareTable,
    GeoPoint,
    Hub,
    HubParams,
    LegMatrices,
    LegTimes,
    Market,
    Mode,
    ModeAttr,
    Segment,
    TasteVector,
)

BASE_TASTE = dict(
    beta_auto_tt=-0.05,
    beta_trans_ivt=-0.03,
    beta_trans_at=-0.05,
    beta_trans_et=-0.05,
    beta_trans_n=-0.4,
    beta_nonveh_tt=-0.07,
    beta_cost=-0.3,
    asc_driving=0.5,
    asc_transit=-0.5,
    asc_ondemand=-1.0,
    asc_biking=-1.5,
    asc_walking=-0.8,
)


def make_taste(**over) -> TasteVector:
    values = dict(BASE_TASTE)
    values.update(over)
    return TasteVector(**values)


def full_attrs(
    drive_min: float = 20.0,
    drive_cost: float = 3.0,
    transit_min: float = 35.0,
    transit_cost: float = 1.5,
) -> dict[Mode, ModeAttr]:
    """All six unimodal modes available with round numbers."""
    return {
        Mode.DRIVING: ModeAttr(ivt_min=drive_min, cost_usd=drive_cost),
        Mode.TRANSIT: ModeAttr(ivt_min=transit_min, access_min=6.0, egress_min=4.0, transfers=1.0, cost_usd=transit_cost),
        Mode.ON_DEMAND_AUTO: ModeAttr(ivt_min=drive_min * 1.2, cost_usd=8.0),
        Mode.BIKING: ModeAttr(ivt_min=40.0),
        Mode.WALKING: ModeAttr(ivt_min=80.0),
        Mode.CARPOOL: ModeAttr(ivt_min=drive_min * 1.15, cost_usd=drive_cost * 0.5),
    }


def make_market(
    od_id: str = "od1",
    segment: Segment = Segment.LOW_INCOME,
    o: tuple[float, float] = (42.65, -73.76),
    d: tuple[float, float] = (42.70, -73.70),
    trips: float = 10.0,
    miles: float = 5.0,
    taste: TasteVector | None = None,
    attrs: dict[Mode, ModeAttr] | None = None,
) -> Market:
    return Market(
        od_id=od_id,
        segment=segment,
        origin=GeoPoint(lat=o[0], lon=o[1]),
        destination=GeoPoint(lat=d[0], lon=d[1]),
        trips_per_day=trips,
        driving_miles=miles,
        attrs=attrs if attrs is not None else full_attrs(),
        taste=taste if taste is not None else make_taste(),
    )


def make_params(beta: float = 0.5, asc: float = -4.0, **per_segment) -> HubParams:
    ascs = {seg: per_segment.get(seg.value, asc) for seg in Segment}
    return HubParams(beta_hub=beta, asc_by_segment=ascs)


def simple_fares() -> FareTable:
    return FareTable(
        bus_fare_usd=1.50,
        car_share_usd_per_hour=5.0,
        bike_share_steps=((30.0, 1.0), (math.inf, 2.5)),
    )


def full_matrices(
    zones: dict[str, GeoPoint],
    hub_id: str,
    minutes: float = 10.0,
    miles: float | None = 2.0,
) -> LegMatrices:
    """Every leg mode available both directions for every zone."""
    matrices = LegMatrices()
    for zone in zones:
        for mode in (Mode.BUS, Mode.CAR, Mode.CAR_SHARE, Mode.BIKE_SHARE, Mode.WALK_LEG):
            leg = LegTimes(
                minutes=minutes,
                access_min=3.0 if mode is Mode.BUS else 0.0,
                egress_min=2.0 if mode is Mode.BUS else 0.0,
                transfers=0.0,
                miles=miles,
            )
            matrices.add(zone, hub_id, mode, leg, leg)
    return matrices


def make_hub(
    hub_id: str = "h1",
    loc: tuple[float, float] = (42.67, -73.73),
    combos: tuple[ComboId, ...] = (ComboId(Mode.CAR, Mode.BUS), ComboId(Mode.WALK_LEG, Mode.BUS)),
    car_share: bool = True,
    bike_share: bool = True,
) -> Hub:
    return Hub(
        id=hub_id,
        location=GeoPoint(lat=loc[0], lon=loc[1]),
        car_share_available=car_share,
        bike_share_available=bike_share,
        combos=frozenset(combos),
    )


def random_taste(rng: np.random.Generator) -> TasteVector:
    return make_taste(
        beta_auto_tt=-float(rng.uniform(0.02, 0.09)),
        beta_trans_ivt=-float(rng.uniform(0.01, 0.06)),
        beta_trans_at=-float(rng.uniform(0.02, 0.09)),
        beta_trans_et=-float(rng.uniform(0.02, 0.09)),
        beta_trans_n=-float(rng.uniform(0.1, 0.8)),
        beta_nonveh_tt=-float(rng.uniform(0.03, 0.12)),
        beta_cost=-float(rng.uniform(0.05, 0.6)),
        asc_driving=float(rng.uniform(-2, 2)),
        asc_transit=float(rng.uniform(-3, 1)),
        asc_ondemand=float(rng.uniform(-3, 1)),
        asc_biking=float(rng.uniform(-3, 1)),
        asc_walking=float(rng.uniform(-3, 1)),
    )


def random_point(rng: np.random.Generator, spread: float = 0.08) -> GeoPoint:
    return GeoPoint(
        lat=42.65 + float(rng.uniform(-spread, spread)),
        lon=-73.75 + float(rng.uniform(-spread, spread)),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
