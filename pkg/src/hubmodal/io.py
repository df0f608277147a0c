"""File formats, atomic writes, and input digests.

All tabular inputs are UTF-8 CSV with a header row and dot decimal
separators; fares and the manifest are JSON.  Parse failures raise
ParseError naming the file, row, and column.  Floats are emitted with
repr (shortest round-trip form), so loading and re-emitting a file is
lossless; every writer goes through a temp-file-then-rename so readers
never observe a partial file.

Markets file columns, in order: od_id, segment, o_lat, o_lon, d_lat,
d_lon, trips_per_day, driving_miles, the per-mode attribute columns, the
twelve taste columns, and optionally o_zone/d_zone.  The taste columns
may be omitted when a separate taste-parameters file keyed by
(od_id, segment) is supplied.  The unavailable-mode convention: the
available flag is 0 and the mode's numeric cells may be blank.

Leg matrices columns: zone_id, hub_id, mode, then to_hub_* and
from_hub_* column groups (min, access_min, egress_min, transfers,
miles).  A blank minutes cell means that direction is unavailable; blank
miles means no network distance is known.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .choice import LEG_MODES, TASTE_FIELDS, ComboId, Market, Mode, ModeAttr, Segment, TasteVector
from .geo import GeoPoint
from .hubs import FareTable, Hub, LegMatrices, LegTimes, SurveyRecord
from .siting import Candidate, StopRecord

_INF = float("inf")


class ParseError(ValueError):
    """Malformed input file content."""


# ----------------------------------------------------------------------
# primitives
# ----------------------------------------------------------------------


def fmt(value) -> str:
    """Shortest round-trip text form of a value for CSV cells."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        value = float(value)  # plain-float repr, not the numpy scalar repr
        if value != value:
            raise ValueError("refusing to write NaN")
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def jsonable(obj):
    """Recursively coerce numpy scalars and arrays to JSON-native types."""
    if isinstance(obj, Mapping):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write text to path via a sibling temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: str | Path, obj) -> Path:
    return atomic_write_text(path, json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


def sha256_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class _Row:
    """One CSV row with typed, error-reporting cell access."""

    def __init__(self, path: str, line_no: int, data: Mapping[str, str]):
        self.path = path
        self.line_no = line_no
        self.data = data

    def fail(self, column: str, why: str) -> ParseError:
        return ParseError(f"{self.path} row {self.line_no}: {why} in column '{column}'")

    def text(self, column: str) -> str:
        value = self.data.get(column)
        if value is None:
            raise ParseError(f"{self.path}: missing column '{column}'")
        return value.strip()

    def require(self, column: str) -> str:
        value = self.text(column)
        if not value:
            raise self.fail(column, "empty value")
        return value

    def number(self, column: str, *, optional: bool = False) -> float | None:
        value = self.text(column)
        if not value:
            if optional:
                return None
            raise self.fail(column, "empty value")
        try:
            out = float(value)
        except ValueError:
            raise self.fail(column, f"malformed number {value!r}") from None
        if not math.isfinite(out):
            raise self.fail(column, f"non-finite number {value!r}")
        return out

    def flag(self, column: str, *, default: bool | None = None) -> bool:
        value = self.text(column)
        if not value and default is not None:
            return default
        if value == "1":
            return True
        if value == "0":
            return False
        raise self.fail(column, f"expected 0 or 1, got {value!r}")


def _read_rows(path: str | Path, required: Sequence[str]) -> list[_Row]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        for col in required:
            if col not in reader.fieldnames:
                raise ParseError(f"{path}: missing column '{col}'")
        return [_Row(str(path), i, row) for i, row in enumerate(reader, start=2)]


# ----------------------------------------------------------------------
# markets
# ----------------------------------------------------------------------

# column prefix, mode, numeric fields carried for that mode
_MODE_COLUMNS: tuple[tuple[str, Mode, tuple[str, ...]], ...] = (
    ("driving", Mode.DRIVING, ("ivt_min", "cost_usd")),
    ("transit", Mode.TRANSIT, ("ivt_min", "access_min", "egress_min", "transfers", "cost_usd")),
    ("ondemand", Mode.ON_DEMAND_AUTO, ("ivt_min", "cost_usd")),
    ("biking", Mode.BIKING, ("ivt_min",)),
    ("walking", Mode.WALKING, ("ivt_min",)),
    ("carpool", Mode.CARPOOL, ("ivt_min", "cost_usd")),
)

MARKET_BASE_COLUMNS = ("od_id", "segment", "o_lat", "o_lon", "d_lat", "d_lon", "trips_per_day", "driving_miles")


def market_columns(*, with_taste: bool = True, with_zones: bool = True) -> list[str]:
    cols = list(MARKET_BASE_COLUMNS)
    for prefix, _, fields_ in _MODE_COLUMNS:
        cols.extend(f"{prefix}_{f}" for f in fields_)
        cols.append(f"{prefix}_available")
    if with_taste:
        cols.extend(TASTE_FIELDS)
    if with_zones:
        cols.extend(("o_zone", "d_zone"))
    return cols


def _parse_segment(row: _Row, column: str = "segment") -> Segment:
    raw = row.require(column)
    try:
        return Segment(raw)
    except ValueError:
        raise row.fail(column, f"unknown segment {raw!r}") from None


def _parse_taste(row: _Row) -> TasteVector:
    values = {}
    for name in TASTE_FIELDS:
        values[name] = row.number(name)
    if values["beta_cost"] >= 0.0:
        raise row.fail("beta_cost", f"beta_cost must be negative, got {values['beta_cost']}")
    return TasteVector(**values)


def load_taste_parameters(path: str | Path) -> dict[tuple[str, Segment], TasteVector]:
    """Taste vectors keyed by (od_id, segment) from a standalone file."""
    rows = _read_rows(path, ("od_id", "segment") + TASTE_FIELDS)
    out: dict[tuple[str, Segment], TasteVector] = {}
    for row in rows:
        key = (row.require("od_id"), _parse_segment(row))
        if key in out:
            raise row.fail("od_id", f"duplicate taste entry for {key[0]}/{key[1].value}")
        out[key] = _parse_taste(row)
    return out


def load_markets(path: str | Path, taste_path: str | Path | None = None) -> list[Market]:
    """Markets from CSV; taste columns inline or joined from taste_path."""
    probe = _read_rows(path, MARKET_BASE_COLUMNS)
    if not probe:
        return []
    have_taste_cols = all(name in probe[0].data for name in TASTE_FIELDS)
    taste_lookup = None
    if not have_taste_cols:
        if taste_path is None:
            raise ParseError(f"{path}: taste columns absent and no taste-parameters file given")
        taste_lookup = load_taste_parameters(taste_path)

    markets = []
    for row in probe:
        od_id = row.require("od_id")
        segment = _parse_segment(row)
        origin = _point(row, "o_lat", "o_lon")
        destination = _point(row, "d_lat", "d_lon")
        trips = row.number("trips_per_day")
        if trips < 0:
            raise row.fail("trips_per_day", "negative trips")
        miles = row.number("driving_miles")
        attrs: dict[Mode, ModeAttr] = {}
        for prefix, mode, fields_ in _MODE_COLUMNS:
            available = row.flag(f"{prefix}_available")
            numbers = {}
            for f in fields_:
                val = row.number(f"{prefix}_{f}", optional=not available)
                numbers[f] = 0.0 if val is None else val
            attrs[mode] = ModeAttr(available=available, **numbers)
        if taste_lookup is not None:
            taste = taste_lookup.get((od_id, segment))
            if taste is None:
                raise row.fail("od_id", f"no taste parameters for {od_id}/{segment.value}")
        else:
            taste = _parse_taste(row)
        o_zone = row.data.get("o_zone", "").strip()
        d_zone = row.data.get("d_zone", "").strip()
        try:
            markets.append(
                Market(
                    od_id=od_id,
                    segment=segment,
                    origin=origin,
                    destination=destination,
                    trips_per_day=trips,
                    driving_miles=miles,
                    attrs=attrs,
                    taste=taste,
                    o_zone=o_zone,
                    d_zone=d_zone,
                )
            )
        except ValueError as err:
            raise ParseError(f"{row.path} row {row.line_no}: {err}") from None
    ids = [m.market_id for m in markets]
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate (od_id, segment) rows")
    return markets


def _point(row: _Row, lat_col: str, lon_col: str) -> GeoPoint:
    try:
        return GeoPoint(lat=row.number(lat_col), lon=row.number(lon_col))
    except ValueError as err:
        if isinstance(err, ParseError):
            raise
        raise row.fail(lat_col, str(err)) from None


def write_markets(markets: Sequence[Market], path: str | Path) -> Path:
    header = market_columns()
    rows = []
    for m in sorted(markets, key=lambda m: m.market_id):
        row = [m.od_id, m.segment.value, m.origin.lat, m.origin.lon, m.destination.lat, m.destination.lon, m.trips_per_day, m.driving_miles]
        for prefix, mode, fields_ in _MODE_COLUMNS:
            attr = m.attrs.get(mode, ModeAttr(available=False))
            row.extend(getattr(attr, f) for f in fields_)
            row.append(attr.available)
        row.extend(getattr(m.taste, name) for name in TASTE_FIELDS)
        row.extend((m.o_zone, m.d_zone))
        rows.append(row)
    return write_csv(path, header, rows)


# ----------------------------------------------------------------------
# survey
# ----------------------------------------------------------------------

SURVEY_COLUMNS = ("hub_id", "o_lat", "o_lon", "d_lat", "d_lon", "entry_mode", "exit_mode", "segment", "complete")

_LEG_MODE_BY_VALUE = {m.value: m for m in LEG_MODES}


def _parse_leg_mode(row: _Row, column: str) -> Mode:
    raw = row.require(column)
    mode = _LEG_MODE_BY_VALUE.get(raw)
    if mode is None:
        raise row.fail(column, f"unknown leg mode {raw!r}")
    return mode


def load_survey(path: str | Path) -> list[SurveyRecord]:
    rows = _read_rows(path, SURVEY_COLUMNS[:7])
    out = []
    for row in rows:
        segment_raw = row.data.get("segment", "").strip()
        out.append(
            SurveyRecord(
                hub_id=row.require("hub_id"),
                origin=_point(row, "o_lat", "o_lon"),
                destination=_point(row, "d_lat", "d_lon"),
                entry_mode=_parse_leg_mode(row, "entry_mode"),
                exit_mode=_parse_leg_mode(row, "exit_mode"),
                segment=_parse_segment(row) if segment_raw else None,
                complete=row.flag("complete", default=True) if "complete" in row.data else True,
            )
        )
    return out


def write_survey(records: Sequence[SurveyRecord], path: str | Path) -> Path:
    rows = [
        [
            r.hub_id,
            r.origin.lat,
            r.origin.lon,
            r.destination.lat,
            r.destination.lon,
            r.entry_mode.value,
            r.exit_mode.value,
            r.segment.value if r.segment else "",
            r.complete,
        ]
        for r in records
    ]
    return write_csv(path, SURVEY_COLUMNS, rows)


# ----------------------------------------------------------------------
# stops and lots
# ----------------------------------------------------------------------


def load_stops(path: str | Path) -> list[StopRecord]:
    rows = _read_rows(path, ("stop_id", "lat", "lon"))
    return [StopRecord(stop_id=row.require("stop_id"), location=_point(row, "lat", "lon")) for row in rows]


def write_stops(stops: Sequence[StopRecord], path: str | Path) -> Path:
    return write_csv(path, ("stop_id", "lat", "lon"), [[s.stop_id, s.location.lat, s.location.lon] for s in stops])


def load_pr_lots(path: str | Path) -> list[GeoPoint]:
    rows = _read_rows(path, ("lot_id", "lat", "lon"))
    return [_point(row, "lat", "lon") for row in rows]


def write_pr_lots(lots: Sequence[GeoPoint], path: str | Path) -> Path:
    return write_csv(
        path,
        ("lot_id", "lat", "lon"),
        [[f"lot{i:04d}", p.lat, p.lon] for i, p in enumerate(lots)],
    )


# ----------------------------------------------------------------------
# leg matrices
# ----------------------------------------------------------------------

MATRIX_COLUMNS = (
    "zone_id",
    "hub_id",
    "mode",
    "to_hub_min",
    "to_hub_access_min",
    "to_hub_egress_min",
    "to_hub_transfers",
    "to_hub_miles",
    "from_hub_min",
    "from_hub_access_min",
    "from_hub_egress_min",
    "from_hub_transfers",
    "from_hub_miles",
)


def _parse_direction(row: _Row, prefix: str) -> LegTimes | None:
    minutes = row.number(f"{prefix}_min", optional=True)
    if minutes is None:
        return None
    access = row.number(f"{prefix}_access_min", optional=True) or 0.0
    egress = row.number(f"{prefix}_egress_min", optional=True) or 0.0
    transfers = row.number(f"{prefix}_transfers", optional=True) or 0.0
    miles = row.number(f"{prefix}_miles", optional=True)
    return LegTimes(minutes=minutes, access_min=access, egress_min=egress, transfers=transfers, miles=miles)


def load_matrices(paths: Sequence[str | Path]) -> LegMatrices:
    """Merge one or more leg matrix files; duplicate keys are an error."""
    matrices = LegMatrices()
    for path in paths:
        for row in _read_rows(path, MATRIX_COLUMNS):
            zone = row.require("zone_id")
            hub_id = row.require("hub_id")
            mode = _parse_leg_mode(row, "mode")
            if (zone, hub_id, mode) in matrices.entries:
                raise row.fail("zone_id", f"duplicate matrix entry ({zone}, {hub_id}, {mode.value})")
            matrices.add(zone, hub_id, mode, _parse_direction(row, "to_hub"), _parse_direction(row, "from_hub"))
    return matrices


def write_matrices(matrices: LegMatrices, path: str | Path) -> Path:
    rows = []
    for (zone, hub_id, mode), (to_hub, from_hub) in sorted(
        matrices.entries.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value)
    ):
        def cells(leg: LegTimes | None):
            if leg is None:
                return [None, None, None, None, None]
            return [leg.minutes, leg.access_min, leg.egress_min, leg.transfers, leg.miles]

        rows.append([zone, hub_id, mode.value] + cells(to_hub) + cells(from_hub))
    return write_csv(path, MATRIX_COLUMNS, rows)


# ----------------------------------------------------------------------
# fares
# ----------------------------------------------------------------------


def load_fares(path: str | Path) -> FareTable:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ParseError(f"{path}: fares must be a JSON object")
    unknown = sorted(set(data) - {"bus_fare_usd", "car_share_usd_per_hour", "bike_share_steps"})
    if unknown:
        raise ParseError(f"{path}: unknown fare keys: {unknown}")
    try:
        steps_raw = data.get("bike_share_steps") or [{"up_to_min": None, "fare_usd": 0.0}]
        steps = tuple(
            (float(s["up_to_min"]) if s["up_to_min"] is not None else _INF, float(s["fare_usd"])) for s in steps_raw
        )
        return FareTable(
            bus_fare_usd=float(data["bus_fare_usd"]),
            car_share_usd_per_hour=float(data["car_share_usd_per_hour"]),
            bike_share_steps=steps,
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"{path}: malformed fares: {err}") from None


def write_fares(fares: FareTable, path: str | Path) -> Path:
    steps = [
        {"up_to_min": None if math.isinf(bound) else bound, "fare_usd": fare}
        for bound, fare in fares.bike_share_steps
    ]
    return write_json(
        path,
        {
            "bus_fare_usd": fares.bus_fare_usd,
            "car_share_usd_per_hour": fares.car_share_usd_per_hour,
            "bike_share_steps": steps,
        },
    )


# ----------------------------------------------------------------------
# hub records (observed usage file)
# ----------------------------------------------------------------------

HUB_RECORD_COLUMNS = (
    "hub_id",
    "lat",
    "lon",
    "car_share_available",
    "bike_share_available",
    "backend_trips_per_month",
    "days_per_month",
    "service_share",
    "survey_responses",
    "survey_days",
    "sample_rate",
)


class HubRecord:
    """One hub definition plus its raw usage observations.

    Exactly one of two observation routes applies: backend counts
    (backend_trips_per_month, days_per_month, service_share) or survey
    expansion (survey_responses, survey_days, and a sample_rate that may
    be inherited from a backend hub).
    """

    def __init__(
        self,
        hub_id: str,
        location: GeoPoint,
        car_share_available: bool,
        bike_share_available: bool,
        backend_trips_per_month: float | None = None,
        days_per_month: float | None = None,
        service_share: float | None = None,
        survey_responses: float | None = None,
        survey_days: float | None = None,
        sample_rate: float | None = None,
    ):
        self.hub_id = hub_id
        self.location = location
        self.car_share_available = car_share_available
        self.bike_share_available = bike_share_available
        self.backend_trips_per_month = backend_trips_per_month
        self.days_per_month = days_per_month
        self.service_share = service_share
        self.survey_responses = survey_responses
        self.survey_days = survey_days
        self.sample_rate = sample_rate

    @property
    def has_backend(self) -> bool:
        return self.backend_trips_per_month is not None

    def __repr__(self) -> str:
        return f"HubRecord({self.hub_id!r})"


def load_hub_records(path: str | Path) -> list[HubRecord]:
    rows = _read_rows(path, HUB_RECORD_COLUMNS)
    out = []
    seen = set()
    for row in rows:
        hub_id = row.require("hub_id")
        if hub_id in seen:
            raise row.fail("hub_id", f"duplicate hub {hub_id!r}")
        seen.add(hub_id)
        backend = row.number("backend_trips_per_month", optional=True)
        days = row.number("days_per_month", optional=True)
        share = row.number("service_share", optional=True)
        if backend is not None and (days is None or share is None):
            raise row.fail("days_per_month", "backend counts need days_per_month and service_share")
        out.append(
            HubRecord(
                hub_id=hub_id,
                location=_point(row, "lat", "lon"),
                car_share_available=row.flag("car_share_available"),
                bike_share_available=row.flag("bike_share_available"),
                backend_trips_per_month=backend,
                days_per_month=days,
                service_share=share,
                survey_responses=row.number("survey_responses", optional=True),
                survey_days=row.number("survey_days", optional=True),
                sample_rate=row.number("sample_rate", optional=True),
            )
        )
    if not out:
        raise ParseError(f"{path}: no hub rows")
    return out


def write_hub_records(records: Sequence[HubRecord], path: str | Path) -> Path:
    rows = [
        [
            r.hub_id,
            r.location.lat,
            r.location.lon,
            r.car_share_available,
            r.bike_share_available,
            r.backend_trips_per_month,
            r.days_per_month,
            r.service_share,
            r.survey_responses,
            r.survey_days,
            r.sample_rate,
        ]
        for r in sorted(records, key=lambda r: r.hub_id)
    ]
    return write_csv(path, HUB_RECORD_COLUMNS, rows)


# ----------------------------------------------------------------------
# geojson
# ----------------------------------------------------------------------


def candidates_geojson(candidates: Sequence[Candidate], reference_ids: Sequence[str] = ()) -> dict:
    """FeatureCollection of candidate points with their metrics."""
    refs = set(reference_ids)
    features = []
    for c in sorted(candidates, key=lambda c: c.candidate_id):
        props = {
            "candidate_id": c.candidate_id,
            "member_stop_ids": list(c.member_stop_ids),
            "car_share_available": c.car_share_available,
            "bike_share_available": c.bike_share_available,
            "reference": c.candidate_id in refs,
        }
        if c.metrics is not None:
            props.update(
                {
                    "potential_demand": c.metrics.potential_demand,
                    "transit_delta": c.metrics.transit_delta,
                    "vmt_reduced": c.metrics.vmt_reduced,
                    "cs_total": c.metrics.cs_total,
                    "no_potential_trips": c.metrics.no_potential_trips,
                }
            )
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [c.location.lon, c.location.lat]},
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": features}
