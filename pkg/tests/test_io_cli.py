"""File format round-trips, parse errors, and the command-line pipeline.

CLI commands run in-process through main(argv) against a generated
fixture in a temp directory.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from conftest import make_market, make_taste, simple_fares

from hubmodal import (
    FareTable,
    GeoPoint,
    HubRecord,
    LegMatrices,
    LegTimes,
    Mode,
    ParseError,
    Segment,
    StopRecord,
    SurveyRecord,
    fmt,
    generate_fixture,
    jsonable,
    load_fares,
    load_hub_records,
    load_markets,
    load_matrices,
    load_pr_lots,
    load_stops,
    load_survey,
    load_taste_parameters,
    sha256_digest,
    write_fares,
    write_hub_records,
    write_markets,
    write_matrices,
    write_pr_lots,
    write_stops,
    write_survey,
)
from hubmodal.cli import ENV_THREADS, main


def test_fmt_values():
    assert fmt(None) == ""
    assert fmt(True) == "1"
    assert fmt(False) == "0"
    assert fmt(np.bool_(True)) == "1"
    assert fmt(1.5) == "1.5"
    assert fmt(np.float64(1.5)) == "1.5"  # no numpy scalar repr leakage
    assert fmt(np.int64(7)) == "7"
    assert fmt("plain") == "plain"
    assert float(fmt(0.1 + 0.2)) == 0.1 + 0.2  # round-trips exactly
    with pytest.raises(ValueError, match="NaN"):
        fmt(float("nan"))


def test_jsonable_strips_numpy_types():
    blob = {"a": np.float64(1.5), "b": [np.int32(2), np.bool_(False)], "c": np.arange(3)}
    got = jsonable(blob)
    assert got == {"a": 1.5, "b": [2, False], "c": [0, 1, 2]}
    json.dumps(got)  # must be serializable as-is


def test_markets_round_trip(tmp_path):
    markets = [
        make_market(od_id="od1", segment=Segment.LOW_INCOME, trips=10.25, miles=4.125),
        make_market(od_id="od1", segment=Segment.SENIOR, trips=3.5),
        make_market(od_id="od2", segment=Segment.STUDENT, taste=make_taste(beta_cost=-0.123456)),
    ]
    path = tmp_path / "markets.csv"
    write_markets(markets, path)
    back = load_markets(path)
    assert [m.market_id for m in back] == sorted(m.market_id for m in markets)
    by_id = {m.market_id: m for m in markets}
    for m in back:
        src = by_id[m.market_id]
        assert m.trips_per_day == src.trips_per_day
        assert m.driving_miles == src.driving_miles
        assert m.origin == src.origin and m.destination == src.destination
        assert m.taste == src.taste
        for mode, attr in src.attrs.items():
            assert m.attrs[mode] == attr


def test_markets_header_only_is_empty(tmp_path):
    path = tmp_path / "markets.csv"
    write_markets([], path)
    assert load_markets(path) == []


def test_markets_unavailable_modes_may_have_blank_cells(tmp_path):
    market = make_market()
    attrs = dict(market.attrs)
    del attrs[Mode.BIKING]
    trimmed = make_market(od_id="trim", attrs=attrs)
    path = tmp_path / "markets.csv"
    write_markets([trimmed], path)
    text = path.read_text()
    back = load_markets(path)[0]
    assert not back.attrs[Mode.BIKING].available
    # an unavailable mode never enters the choice set
    assert Mode.BIKING.value in text.splitlines()[0]


def test_markets_reject_nonnegative_beta_cost(tmp_path):
    path = tmp_path / "markets.csv"
    write_markets([make_market(od_id="bad", taste=make_taste(beta_cost=-0.3))], path)
    text = path.read_text().replace("-0.3", "0.1")
    path.write_text(text)
    with pytest.raises(ParseError, match=r"row 2.*beta_cost must be negative.*beta_cost"):
        load_markets(path)


def test_markets_duplicate_rows_rejected(tmp_path):
    path = tmp_path / "markets.csv"
    write_markets([make_market(od_id="od1")], path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines + [lines[1]]) + "\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_markets(path)


def test_markets_missing_column_named_in_error(tmp_path):
    path = tmp_path / "markets.csv"
    write_markets([make_market()], path)
    header, row = path.read_text().splitlines()
    cols = header.split(",")
    i = cols.index("trips_per_day")
    cells = row.split(",")
    cells[i] = ""
    path.write_text(",".join(cols) + "\n" + ",".join(cells) + "\n")
    with pytest.raises(ParseError, match="trips_per_day"):
        load_markets(path)


def test_markets_taste_join(tmp_path):
    taste = make_taste(beta_cost=-0.42)
    market = make_market(od_id="od9", segment=Segment.SENIOR, taste=taste)
    full = tmp_path / "markets_full.csv"
    write_markets([market], full)
    text = full.read_text().splitlines()
    header = text[0].split(",")
    from hubmodal import TASTE_FIELDS

    keep = [i for i, c in enumerate(header) if c not in TASTE_FIELDS]
    slim = tmp_path / "markets_slim.csv"
    slim.write_text(
        "\n".join(",".join(line.split(",")[i] for i in keep) for line in text) + "\n"
    )
    taste_path = tmp_path / "taste.csv"
    taste_header = ["od_id", "segment", *TASTE_FIELDS]
    taste_row = ["od9", "senior"] + [repr(getattr(taste, f)) for f in TASTE_FIELDS]
    taste_path.write_text(",".join(taste_header) + "\n" + ",".join(taste_row) + "\n")

    back = load_markets(slim, taste_path)[0]
    assert back.taste == taste
    # no taste columns and no taste file is an error
    with pytest.raises(ParseError, match="taste"):
        load_markets(slim)
    # a market without a matching taste row is an error
    other = tmp_path / "taste_other.csv"
    other.write_text(",".join(taste_header) + "\n" + ",".join(["odX", "senior"] + taste_row[2:]) + "\n")
    with pytest.raises(ParseError, match="no taste parameters"):
        load_markets(slim, other)


def test_taste_parameters_duplicate_key_rejected(tmp_path):
    from hubmodal import TASTE_FIELDS

    taste = make_taste()
    path = tmp_path / "taste.csv"
    header = ["od_id", "segment", *TASTE_FIELDS]
    row = ["od1", "senior"] + [repr(getattr(taste, f)) for f in TASTE_FIELDS]
    path.write_text(",".join(header) + "\n" + ",".join(row) + "\n" + ",".join(row) + "\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_taste_parameters(path)


def test_survey_round_trip(tmp_path):
    records = [
        SurveyRecord("h1", GeoPoint(42.1, -73.2), GeoPoint(42.3, -73.4), Mode.CAR, Mode.BUS, Segment.SENIOR, True),
        SurveyRecord("h1", GeoPoint(42.5, -73.6), GeoPoint(42.7, -73.8), Mode.BIKE_SHARE, Mode.WALK_LEG, None, False),
    ]
    path = tmp_path / "survey.csv"
    write_survey(records, path)
    back = load_survey(path)
    assert back == records  # frozen dataclasses compare by value
    assert back[1].segment is None


def test_survey_rejects_unknown_leg_mode(tmp_path):
    path = tmp_path / "survey.csv"
    write_survey([SurveyRecord("h1", GeoPoint(42.1, -73.2), GeoPoint(42.3, -73.4), Mode.CAR, Mode.BUS)], path)
    path.write_text(path.read_text().replace("car", "teleport"))
    with pytest.raises(ParseError, match="teleport"):
        load_survey(path)


def test_stops_and_lots_round_trip(tmp_path):
    stops = [StopRecord("s1", GeoPoint(42.1, -73.2)), StopRecord("s2", GeoPoint(42.3, -73.4))]
    spath = tmp_path / "stops.csv"
    write_stops(stops, spath)
    assert load_stops(spath) == stops
    lots = [GeoPoint(42.5, -73.6), GeoPoint(42.7, -73.8)]
    lpath = tmp_path / "lots.csv"
    write_pr_lots(lots, lpath)
    assert load_pr_lots(lpath) == lots


def test_matrices_round_trip_and_blank_direction(tmp_path):
    matrices = LegMatrices()
    matrices.add("z1", "h1", Mode.BUS,
                 LegTimes(minutes=15.0, access_min=5.0, egress_min=5.0, transfers=0.0, miles=3.25), None)
    matrices.add("z2", "h1", Mode.CAR, LegTimes(minutes=9.0, miles=2.5), LegTimes(minutes=10.0, miles=2.5))
    matrices.add("z1", "h1", Mode.WALK_LEG, None, LegTimes(minutes=12.0))
    path = tmp_path / "matrix.csv"
    write_matrices(matrices, path)
    back = load_matrices([path])
    assert back.entries == matrices.entries
    # a blank to_hub_min means that direction is unavailable
    assert back.to_hub("z1", "h1", Mode.WALK_LEG) is None
    assert back.from_hub("z1", "h1", Mode.WALK_LEG) == LegTimes(minutes=12.0)


def test_matrices_duplicate_key_across_files_rejected(tmp_path):
    matrices = LegMatrices()
    matrices.add("z1", "h1", Mode.BUS, LegTimes(minutes=15.0), None)
    p1 = tmp_path / "m1.csv"
    p2 = tmp_path / "m2.csv"
    write_matrices(matrices, p1)
    write_matrices(matrices, p2)
    assert len(load_matrices([p1]).entries) == 1
    with pytest.raises(ParseError, match="duplicate matrix entry"):
        load_matrices([p1, p2])


def test_fares_round_trip(tmp_path):
    fares = FareTable(
        bus_fare_usd=1.50,
        car_share_usd_per_hour=5.0,
        bike_share_steps=((30.0, 1.0), (60.0, 2.5), (math.inf, 5.0)),
    )
    path = tmp_path / "fares.json"
    write_fares(fares, path)
    back = load_fares(path)
    assert back == fares
    # the open-ended last step serializes as null
    assert json.loads(path.read_text())["bike_share_steps"][-1]["up_to_min"] is None


def test_fares_unknown_key_rejected(tmp_path):
    path = tmp_path / "fares.json"
    path.write_text(json.dumps({"bus_fare_usd": 1.0, "car_share_usd_per_hour": 5.0, "surge": 2.0}))
    with pytest.raises(ParseError, match="surge"):
        load_fares(path)


def test_hub_records_round_trip(tmp_path):
    records = [
        HubRecord(
            hub_id="hub-a", location=GeoPoint(42.1, -73.2),
            car_share_available=True, bike_share_available=True,
            backend_trips_per_month=120.0, days_per_month=30.0, service_share=0.35,
            survey_responses=16.0, survey_days=4.0, sample_rate=None,
        ),
        HubRecord(
            hub_id="hub-b", location=GeoPoint(42.3, -73.4),
            car_share_available=False, bike_share_available=True,
            backend_trips_per_month=None, days_per_month=None, service_share=None,
            survey_responses=9.0, survey_days=20.0, sample_rate=0.4375,
        ),
    ]
    path = tmp_path / "hubs.csv"
    write_hub_records(records, path)
    back = load_hub_records(path)
    assert len(back) == 2
    for a, b in zip(back, records):
        for name in (
            "hub_id", "car_share_available", "bike_share_available",
            "backend_trips_per_month", "days_per_month", "service_share",
            "survey_responses", "survey_days", "sample_rate",
        ):
            assert getattr(a, name) == getattr(b, name), name
    assert back[0].has_backend and not back[1].has_backend


def test_hub_records_duplicate_rejected(tmp_path):
    path = tmp_path / "hubs.csv"
    rec = HubRecord(
        hub_id="hub-a", location=GeoPoint(42.1, -73.2),
        car_share_available=True, bike_share_available=True,
        backend_trips_per_month=None, days_per_month=None, service_share=None,
        survey_responses=5.0, survey_days=4.0, sample_rate=0.5,
    )
    write_hub_records([rec, rec], path)
    with pytest.raises(ParseError, match="duplicate"):
        load_hub_records(path)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    from hubmodal import write_json

    write_json(tmp_path / "a.json", {"x": 1})
    leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []
    assert sha256_digest(tmp_path / "a.json") == sha256_digest(tmp_path / "a.json")


# ----------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------


def _tree_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): sha256_digest(p)
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fix") / "inputs"
    code = main(["gen-fixture", "--seed", "7", "--out-dir", str(out), "--od-pairs", "24", "--stops", "8"])
    assert code == 0
    return out


def test_gen_fixture_is_reproducible(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["gen-fixture", "--seed", "7", "--out-dir", str(a), "--od-pairs", "10", "--stops", "6"]) == 0
    assert main(["gen-fixture", "--seed", "7", "--out-dir", str(b), "--od-pairs", "10", "--stops", "6"]) == 0
    assert _tree_digest(a) == _tree_digest(b)
    c = tmp_path / "c"
    assert main(["gen-fixture", "--seed", "8", "--out-dir", str(c), "--od-pairs", "10", "--stops", "6"]) == 0
    assert _tree_digest(a) != _tree_digest(c)


def test_gen_fixture_outputs_parse(fixture_dir):
    manifest = json.loads((fixture_dir / "manifest.json").read_text())
    markets = load_markets(fixture_dir / manifest["markets"])
    assert markets and all(m.taste.beta_cost < 0 for m in markets)
    load_survey(fixture_dir / manifest["survey"])
    load_stops(fixture_dir / manifest["stops"])
    load_pr_lots(fixture_dir / manifest["pr_lots"])
    load_fares(fixture_dir / manifest["fares"])
    load_hub_records(fixture_dir / manifest["observed_usage"])
    load_matrices([fixture_dir / p for p in manifest["leg_matrices"]])


def _run(args, out: Path) -> dict:
    code = main([*args, "--out-dir", str(out)])
    assert code == 0, args
    return {p.name: p for p in out.iterdir()}


def test_cli_pipeline_end_to_end(fixture_dir, tmp_path):
    manifest = str(fixture_dir / "manifest.json")

    files = _run(["derive-threshold", "--manifest", manifest], tmp_path / "thr")
    threshold = json.loads(files["threshold.json"].read_text())
    assert threshold["threshold"] >= 1.0
    assert threshold["threshold_source"] == "survey_p90"
    assert threshold["inputs"]

    files = _run(["identify-trips", "--manifest", manifest], tmp_path / "ident")
    trips = files["trips.csv"].read_text().splitlines()
    assert trips[0] == "hub_id,market_id"
    assert len(trips) > 1
    report = json.loads(files["identify.json"].read_text())
    assert set(report["hubs"]) == {"hub-a", "hub-b"}
    for entry in report["hubs"].values():
        assert entry["potential_trips_per_day"] > 0

    files = _run(["calibrate", "--manifest", manifest], tmp_path / "cal")
    cal = json.loads(files["calibration.json"].read_text())
    assert 0 < cal["params"]["beta_hub"] <= 1
    assert set(cal["params"]["asc_by_segment"]) == {s.value for s in Segment}
    assert cal["objective"] < 1e-4
    assert cal["rank_deficient"] is True  # two hubs, five parameters
    assert len(cal["per_hub"]) == 2

    params_file = files["calibration.json"]
    files = _run(["assess", "--manifest", manifest, "--params", str(params_file)], tmp_path / "ass")
    impacts = json.loads(files["impacts.json"].read_text())
    assert set(impacts["hubs"]) == {"hub-a", "hub-b"}
    totals = impacts["totals"]
    assert totals["potential_demand_trips_per_day"] > 0
    assert totals["consumer_surplus_usd_per_day"] >= 0

    files = _run(["rank", "--manifest", manifest, "--params", str(params_file)], tmp_path / "rank")
    lines = files["ranking.csv"].read_text().splitlines()
    assert lines[0].startswith("candidate_id,is_reference")
    summary = json.loads(files["rank_summary.json"].read_text())
    assert summary["n_candidates"] > 0
    assert summary["n_references"] == 2
    geo = json.loads(files["candidates.geojson"].read_text())
    assert geo["type"] == "FeatureCollection"
    assert len(geo["features"]) == summary["n_candidates"] + summary["n_references"]


def test_cli_rank_is_thread_invariant(fixture_dir, tmp_path):
    manifest = str(fixture_dir / "manifest.json")
    a = tmp_path / "t1"
    b = tmp_path / "t4"
    assert main(["rank", "--manifest", manifest, "--threads", "1", "--out-dir", str(a)]) == 0
    assert main(["rank", "--manifest", manifest, "--threads", "4", "--out-dir", str(b)]) == 0
    assert _tree_digest(a) == _tree_digest(b)


def test_cli_threads_env_default(fixture_dir, tmp_path, monkeypatch):
    manifest = str(fixture_dir / "manifest.json")
    monkeypatch.setenv(ENV_THREADS, "3")
    out = tmp_path / "env"
    assert main(["rank", "--manifest", manifest, "--out-dir", str(out)]) == 0
    monkeypatch.setenv(ENV_THREADS, "not-a-number")
    code = main(["rank", "--manifest", manifest, "--out-dir", str(tmp_path / "bad")])
    assert code == 1


def test_cli_missing_manifest_is_an_error(tmp_path, capsys):
    code = main(["derive-threshold", "--out-dir", str(tmp_path / "x")])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    record = json.loads(err)
    assert record["error"]
    assert "manifest" in record["message"]


def test_cli_unreadable_input_is_an_error(tmp_path, capsys):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"markets": "missing.csv"}))
    code = main(["identify-trips", "--manifest", str(manifest), "--out-dir", str(tmp_path / "x")])
    assert code == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"]


def test_cli_threshold_override(fixture_dir, tmp_path):
    manifest = str(fixture_dir / "manifest.json")
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"threshold_override": 1.9}))
    files = _run(["derive-threshold", "--manifest", manifest, "--config", str(config)], tmp_path / "o")
    report = json.loads(files["threshold.json"].read_text())
    assert report["threshold"] == 1.9
    assert report["threshold_source"] == "override"
