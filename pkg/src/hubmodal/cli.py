"""Command line front end.

Subcommands mirror the pipeline stages: derive-threshold, identify-trips,
calibrate, assess, rank, and gen-fixture.  Inputs come from a JSON
manifest (--manifest) naming the data files and an optional JSON config
(--config).  Reports land in --out-dir, echo the active config, and
carry sha256 digests of every input consumed, so a result can always be
traced back to its exact inputs.  Failures print a single-line JSON
error record to stderr and exit 1.

Worker threads resolve in order: --threads flag, config threads (when
positive), the HUBMODAL_THREADS environment variable, then 1.  Thread
count never changes any output byte, only wall time.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import io
from .calibration import (
    CalibrationResult,
    HubParams,
    ObservedUsage,
    calibrate,
    derive_observed_rate,
    derive_sample_rate,
    infer_trips_from_sample,
)
from .choice import Segment
from .config import Manifest, PipelineConfig
from .fixtures import generate_fixture
from .geo import derive_threshold, detour_ratio, identify_potential_trips
from .hubs import Hub, MarketTable, build_combos, prepare_hub
from .impacts import EmissionFactor, assess_hub
from .siting import Candidate, assign_services, cluster_stops, evaluate_candidates, rank_and_summarize

ENV_THREADS = "HUBMODAL_THREADS"

METRIC_COLUMNS = ("potential_demand", "transit_delta", "vmt_reduced", "cs_total")


def _resolve_threads(arg_threads: int | None, cfg: PipelineConfig) -> int:
    if arg_threads is not None:
        if arg_threads < 1:
            raise ValueError("--threads must be >= 1")
        return arg_threads
    if cfg.threads > 0:
        return cfg.threads
    raw = os.environ.get(ENV_THREADS, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{ENV_THREADS} must be >= 1, got {n}")
        return n
    return 1


def _load_base(args) -> tuple[Manifest, PipelineConfig]:
    if not args.manifest:
        raise ValueError("--manifest is required for this command")
    manifest = Manifest.from_json(args.manifest)
    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    return manifest, config


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _digests(manifest: Manifest) -> dict:
    out = {}
    for name in ("markets", "taste_parameters", "fares", "stops", "pr_lots", "survey", "observed_usage"):
        p = getattr(manifest, name)
        if p:
            out[name] = {"path": str(p), "sha256": io.sha256_digest(p)}
    for i, p in enumerate(manifest.leg_matrices):
        out[f"leg_matrices[{i}]"] = {"path": str(p), "sha256": io.sha256_digest(p)}
    return out


def _report_base(args, manifest: Manifest, config: PipelineConfig) -> dict:
    return {"config": config.to_dict(), "inputs": _digests(manifest), "seed": args.seed}


def _resolve_threshold(config: PipelineConfig, survey, hub_locations) -> tuple[float, dict]:
    """Detour threshold: the configured override, or the survey's
    90th-percentile detour ratio.  Survey rows with a degenerate OD pair
    are skipped and counted."""
    if config.threshold_override is not None:
        return float(config.threshold_override), {
            "threshold_source": "override",
            "n_detour_records": 0,
            "n_skipped_degenerate": 0,
        }
    records = []
    skipped = 0
    for rec in survey:
        loc = hub_locations.get(rec.hub_id)
        if loc is None:
            raise ValueError(f"survey references unknown hub {rec.hub_id!r}")
        try:
            records.append(detour_ratio(rec.origin, rec.destination, loc))
        except ValueError:
            skipped += 1
    if not records:
        raise ValueError("no usable survey records to derive a detour threshold")
    thr = derive_threshold(records)
    return thr, {
        "threshold_source": "survey_p90",
        "n_detour_records": len(records),
        "n_skipped_degenerate": skipped,
    }


def _build_hub(rec: io.HubRecord, survey) -> Hub:
    rows = [r for r in survey if r.hub_id == rec.hub_id]
    combos = build_combos(
        rows,
        car_share_available=rec.car_share_available,
        bike_share_available=rec.bike_share_available,
    )
    return Hub(
        id=rec.hub_id,
        location=rec.location,
        car_share_available=rec.car_share_available,
        bike_share_available=rec.bike_share_available,
        combos=combos,
    )


def _build_setups(table, hub_recs, survey, matrices, fares, config, threshold):
    setups = {}
    potentials = {}
    for rec in hub_recs:
        hub = _build_hub(rec, survey)
        ids = identify_potential_trips(
            table,
            rec.location,
            threshold,
            condition2_mode=config.condition2_mode,
            condition2_km=config.condition2_km,
        )
        if not ids:
            raise ValueError(f"hub {rec.hub_id}: no potential trips at threshold {threshold}")
        setup = prepare_hub(
            table,
            hub,
            ids,
            matrices,
            fares,
            car_cost_per_mile=config.car_cost_per_mile,
            circuity_factor=config.circuity_factor,
        )
        setups[rec.hub_id] = setup
        potentials[rec.hub_id] = float(setup.trips.sum())
    return setups, potentials


def _resolve_observed(hub_recs, potentials) -> tuple[list[ObservedUsage], dict]:
    """Normalize each hub's raw observations to an observed proportion.

    Backend counts win when present.  Survey-expanded hubs need a sample
    rate; a blank one inherits the rate derived at the backend-counted
    hubs, and inheritance requires that derived rate to be unique.
    """
    backend: dict[str, ObservedUsage] = {}
    for rec in hub_recs:
        if rec.has_backend:
            backend[rec.hub_id] = derive_observed_rate(
                rec.backend_trips_per_month,
                rec.days_per_month,
                rec.service_share,
                potentials[rec.hub_id],
                hub_id=rec.hub_id,
            )
    derived_rates: dict[str, float] = {}
    for rec in hub_recs:
        usage = backend.get(rec.hub_id)
        if usage is not None and rec.survey_responses is not None and rec.survey_days:
            derived_rates[rec.hub_id] = derive_sample_rate(
                rec.survey_responses, usage.observed_trips_per_day, rec.survey_days
            )

    observed = []
    meta: dict[str, dict] = {}
    for rec in hub_recs:
        if rec.hub_id in backend:
            observed.append(backend[rec.hub_id])
            meta[rec.hub_id] = {"route": "backend"}
            if rec.hub_id in derived_rates:
                meta[rec.hub_id]["sample_rate"] = derived_rates[rec.hub_id]
            continue
        if rec.survey_responses is None or rec.survey_days is None:
            raise ValueError(f"hub {rec.hub_id}: neither backend counts nor survey counts are present")
        rate = rec.sample_rate
        source = "given"
        if rate is None:
            uniq: list[float] = []
            for v in sorted(derived_rates.values()):
                if not uniq or abs(v - uniq[-1]) > 1e-9 * max(1.0, abs(v)):
                    uniq.append(v)
            if not uniq:
                raise ValueError(f"hub {rec.hub_id}: no sample rate given and none derivable from backend hubs")
            if len(uniq) > 1:
                raise ValueError(f"hub {rec.hub_id}: ambiguous sample rate inheritance, candidates {uniq}")
            rate = uniq[0]
            source = "inherited"
        observed.append(
            infer_trips_from_sample(
                rec.survey_responses, rec.survey_days, rate, potentials[rec.hub_id], hub_id=rec.hub_id
            )
        )
        meta[rec.hub_id] = {"route": "survey", "sample_rate": rate, "sample_rate_source": source}
    return observed, meta


def _params_dict(params: HubParams) -> dict:
    return {
        "beta_hub": params.beta_hub,
        "asc_by_segment": {seg.value: params.asc_by_segment[seg] for seg in sorted(params.asc_by_segment, key=lambda s: s.value)},
    }


def _read_params(path: str | Path) -> HubParams:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: params file must be a JSON object")
    node = data.get("params", data)
    try:
        return HubParams(
            beta_hub=float(node["beta_hub"]),
            asc_by_segment={Segment(k): float(v) for k, v in node["asc_by_segment"].items()},
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"{path}: malformed params: {err}") from None


def _run_calibration(table, hub_recs, survey, matrices, fares, config, threshold):
    setups, potentials = _build_setups(table, hub_recs, survey, matrices, fares, config, threshold)
    observed, obs_meta = _resolve_observed(hub_recs, potentials)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = calibrate(observed, setups, settings=config.optimizer)
    notes = [str(w.message) for w in caught]
    return result, observed, obs_meta, setups, notes


def _calibration_report(result: CalibrationResult, observed, obs_meta) -> dict:
    return {
        "params": _params_dict(result.params),
        "objective": result.objective,
        "converged": result.converged,
        "rank_deficient": result.rank_deficient,
        "method": result.method,
        "n_evaluations": result.n_evaluations,
        "trace": list(result.trace),
        "per_hub": [
            {"hub_id": f.hub_id, "observed": f.observed, "predicted": f.predicted} for f in result.per_hub
        ],
        "observed": {
            u.hub_id: {
                "trips_per_day": u.observed_trips_per_day,
                "potential_trips_per_day": u.potential_trips_per_day,
                "proportion": u.observed_proportion,
                **obs_meta[u.hub_id],
            }
            for u in observed
        },
    }


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def _cmd_derive_threshold(args) -> int:
    manifest, config = _load_base(args)
    manifest.require("survey", "observed_usage")
    survey = io.load_survey(manifest.survey)
    hub_recs = io.load_hub_records(manifest.observed_usage)
    thr, thr_meta = _resolve_threshold(config, survey, {r.hub_id: r.location for r in hub_recs})
    report = {"threshold": thr, **thr_meta, **_report_base(args, manifest, config)}
    path = io.write_json(_out_dir(args) / "threshold.json", report)
    print(f"threshold {thr}")
    print(f"wrote {path}")
    return 0


def _cmd_identify_trips(args) -> int:
    manifest, config = _load_base(args)
    manifest.require("markets", "observed_usage")
    markets = io.load_markets(manifest.markets, manifest.taste_parameters)
    table = MarketTable.ensure(markets)
    hub_recs = io.load_hub_records(manifest.observed_usage)
    if config.threshold_override is None:
        manifest.require("survey")
    survey = io.load_survey(manifest.survey) if manifest.survey else []
    thr, thr_meta = _resolve_threshold(config, survey, {r.hub_id: r.location for r in hub_recs})

    rows = []
    hubs_report = {}
    for rec in hub_recs:
        ids = identify_potential_trips(
            table,
            rec.location,
            thr,
            condition2_mode=config.condition2_mode,
            condition2_km=config.condition2_km,
        )
        trips = sum(table.trips[table.id_index[i]] for i in ids)
        hubs_report[rec.hub_id] = {"n_markets": len(ids), "potential_trips_per_day": float(trips)}
        rows.extend((rec.hub_id, mid) for mid in ids)

    out = _out_dir(args)
    trips_path = io.write_csv(out / "trips.csv", ("hub_id", "market_id"), rows)
    report = {"threshold": thr, **thr_meta, "hubs": hubs_report, **_report_base(args, manifest, config)}
    json_path = io.write_json(out / "identify.json", report)
    print(f"wrote {trips_path}")
    print(f"wrote {json_path}")
    return 0


def _load_model_inputs(args):
    manifest, config = _load_base(args)
    manifest.require("markets", "fares", "survey", "observed_usage", "leg_matrices")
    markets = io.load_markets(manifest.markets, manifest.taste_parameters)
    table = MarketTable.ensure(markets)
    survey = io.load_survey(manifest.survey)
    hub_recs = io.load_hub_records(manifest.observed_usage)
    matrices = io.load_matrices(manifest.leg_matrices)
    fares = io.load_fares(manifest.fares)
    thr, thr_meta = _resolve_threshold(config, survey, {r.hub_id: r.location for r in hub_recs})
    return manifest, config, table, survey, hub_recs, matrices, fares, thr, thr_meta


def _cmd_calibrate(args) -> int:
    manifest, config, table, survey, hub_recs, matrices, fares, thr, thr_meta = _load_model_inputs(args)
    result, observed, obs_meta, _, notes = _run_calibration(table, hub_recs, survey, matrices, fares, config, thr)
    report = {
        "threshold": thr,
        **thr_meta,
        **_calibration_report(result, observed, obs_meta),
        "warnings": notes,
        **_report_base(args, manifest, config),
    }
    path = io.write_json(_out_dir(args) / "calibration.json", report)
    print(f"objective {result.objective}")
    print(f"wrote {path}")
    return 0


def _obtain_params(args, table, survey, hub_recs, matrices, fares, config, thr):
    """Params from --params when given, else a fresh in-process fit."""
    if args.params:
        return _read_params(args.params), None, []
    result, observed, obs_meta, _, notes = _run_calibration(table, hub_recs, survey, matrices, fares, config, thr)
    calib = {**_calibration_report(result, observed, obs_meta), "warnings": notes}
    return result.params, calib, notes


def _cmd_assess(args) -> int:
    manifest, config, table, survey, hub_recs, matrices, fares, thr, thr_meta = _load_model_inputs(args)
    params, calib, _ = _obtain_params(args, table, survey, hub_recs, matrices, fares, config, thr)
    setups, _ = _build_setups(table, hub_recs, survey, matrices, fares, config, thr)
    emissions = EmissionFactor(grams_co2_per_mile=config.grams_co2_per_mile, days_per_year=config.days_per_year)

    hubs_out = {}
    totals = {
        "potential_demand_trips_per_day": 0.0,
        "multimodal_trips_per_day": 0.0,
        "transit_delta_trips_per_day": 0.0,
        "vmt_reduced_per_day": 0.0,
        "emissions_kg_per_day": 0.0,
        "emissions_tons_per_year": 0.0,
        "consumer_surplus_usd_per_day": 0.0,
    }
    for hub_id in sorted(setups):
        rep = assess_hub(
            setups[hub_id],
            params,
            emissions=emissions,
            include_on_demand_auto=config.include_on_demand_auto_vmt,
            literal_lower_branch=config.literal_lower_branch,
        )
        hubs_out[hub_id] = rep.to_dict()
        totals["potential_demand_trips_per_day"] += rep.potential_demand
        totals["multimodal_trips_per_day"] += rep.multimodal_total
        totals["transit_delta_trips_per_day"] += rep.transit_delta
        totals["vmt_reduced_per_day"] += rep.vmt.reduced
        totals["emissions_kg_per_day"] += rep.vmt.emissions_kg_per_day
        totals["emissions_tons_per_year"] += rep.vmt.emissions_tons_per_year
        totals["consumer_surplus_usd_per_day"] += rep.cs_total

    report = {
        "threshold": thr,
        **thr_meta,
        "params": _params_dict(params),
        "hubs": hubs_out,
        "totals": totals,
        **_report_base(args, manifest, config),
    }
    if calib is not None:
        report["calibration"] = calib
    path = io.write_json(_out_dir(args) / "impacts.json", report)
    print(f"wrote {path}")
    return 0


def _cmd_rank(args) -> int:
    manifest, config, table, survey, hub_recs, matrices, fares, thr, thr_meta = _load_model_inputs(args)
    manifest.require("stops", "pr_lots")
    stops = io.load_stops(manifest.stops)
    lots = io.load_pr_lots(manifest.pr_lots)
    threads = _resolve_threads(args.threads, config)
    params, calib, _ = _obtain_params(args, table, survey, hub_recs, matrices, fares, config, thr)

    candidates = assign_services(cluster_stops(stops), lots)
    references = [
        Candidate(
            candidate_id=rec.hub_id,
            location=rec.location,
            member_stop_ids=(),
            car_share_available=rec.car_share_available,
            bike_share_available=rec.bike_share_available,
        )
        for rec in hub_recs
    ]
    reference_ids = [rec.hub_id for rec in hub_recs]
    overlap = set(reference_ids) & {c.candidate_id for c in candidates}
    if overlap:
        raise ValueError(f"hub ids collide with candidate ids: {sorted(overlap)}")

    evaluated = evaluate_candidates(
        candidates + references, table, params, thr, matrices, fares, config=config, threads=threads
    )
    ranking, summary = rank_and_summarize(evaluated, reference_ids=reference_ids)

    header = ["candidate_id", "is_reference"]
    header += list(METRIC_COLUMNS)
    header += [f"rank_{k}" for k in METRIC_COLUMNS]
    header += [f"percentile_{k}" for k in METRIC_COLUMNS]
    ref_set = set(reference_ids)
    ordered = sorted(ranking.rows, key=lambda r: (r.rank["potential_demand"], r.candidate_id))
    rows = []
    for r in ordered:
        row = [r.candidate_id, r.candidate_id in ref_set]
        row += [r.metrics.get(k) for k in METRIC_COLUMNS]
        row += [r.rank[k] for k in METRIC_COLUMNS]
        row += [r.percentile[k] for k in METRIC_COLUMNS]
        rows.append(row)

    out = _out_dir(args)
    csv_path = io.write_csv(out / "ranking.csv", header, rows)
    report = {
        "threshold": thr,
        **thr_meta,
        "params": _params_dict(params),
        "n_candidates": len(candidates),
        "n_references": len(references),
        "summary": summary,
        **_report_base(args, manifest, config),
    }
    if calib is not None:
        report["calibration"] = calib
    json_path = io.write_json(out / "rank_summary.json", report)
    geo_path = io.write_json(out / "candidates.geojson", io.candidates_geojson(evaluated, reference_ids))
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    print(f"wrote {geo_path}")
    return 0


def _cmd_gen_fixture(args) -> int:
    seed = 2024 if args.seed is None else args.seed
    paths = generate_fixture(
        Path(args.out_dir),
        seed=seed,
        od_pairs=args.od_pairs,
        stops=args.stops,
        pr_lots=args.pr_lots,
    )
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="JSON manifest naming the input files")
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (fixture generation) and report echo")
    common.add_argument("--out-dir", default="out", help="directory for outputs (default: out)")
    common.add_argument("--threads", type=int, default=None, help=f"worker threads; default from config or ${ENV_THREADS}")

    parser = argparse.ArgumentParser(prog="hubmodal", description="Mobility hub demand, impact, and siting pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive-threshold", parents=[common], help="detour threshold from the intercept survey")
    p.set_defaults(func=_cmd_derive_threshold)

    p = sub.add_parser("identify-trips", parents=[common], help="potential trips for each observed hub")
    p.set_defaults(func=_cmd_identify_trips)

    p = sub.add_parser("calibrate", parents=[common], help="fit the nest parameters to observed usage")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("assess", parents=[common], help="impact metrics for the observed hubs")
    p.add_argument("--params", help="params JSON (a calibration report); omitted: calibrate in process")
    p.set_defaults(func=_cmd_assess)

    p = sub.add_parser("rank", parents=[common], help="score and rank siting candidates")
    p.add_argument("--params", help="params JSON (a calibration report); omitted: calibrate in process")
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("gen-fixture", parents=[common], help="write a synthetic input set")
    p.add_argument("--od-pairs", type=int, default=40, help="OD pairs (4 segment markets each)")
    p.add_argument("--stops", type=int, default=12, help="bus stops in the roster")
    p.add_argument("--pr-lots", type=int, default=2, help="park-and-ride lots")
    p.set_defaults(func=_cmd_gen_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:  # emit a machine-readable error record
        record = {"error": type(err).__name__, "message": str(err)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
