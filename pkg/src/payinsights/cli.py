"""Command-line entry point wiring config, pipeline stages, tuning,
evaluation, and the query service."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict

from .build import build_store, clean_cohorts, compute_build_id, smoothing_params
from .config import Config, ConfigError
from .evalharness import coverage_test, perturbation_study, qq_points
from .ingest import load_external_wage_rows, load_many_to_many
from .model import CompensationType
from .outliers import map_external_limits
from .pipeline import InsightStore, diff_stores, train_priors_from_cohorts, type_values
from .tuning import GridSpec, grid_search, make_split


def _write_json(path: str | None, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def cmd_ingest(config: Config, out: str | None) -> int:
    rows = load_external_wage_rows(config.paths["external_wage_rows"])
    occ_map = load_many_to_many(config.paths["occupation_title_map"], "occ_id", "title_id")
    region_map = load_many_to_many(
        config.paths["external_region_map"], "ext_region_id", "region_id"
    )
    limits, report = map_external_limits(rows, occ_map, region_map)
    out_path = out or config.paths["title_region_limits"]
    limits.write_csv(out_path)
    print(f"wrote {len(limits.limits)} (title, region) limit pairs to {out_path}")
    if report.degenerate_limits:
        print(f"degenerate rows: {report.degenerate_limits}")
    return 0


def cmd_outliers(config: Config, out: str | None) -> int:
    cohorts, report, diagnostics = clean_cohorts(config)
    _write_json(
        out or config.paths.get("report_out"),
        {
            "cohorts": len(cohorts),
            "report": asdict(report),
            "diagnostics": diagnostics,
        },
    )
    return 0


def cmd_build(config: Config, out: str | None) -> int:
    store, _report, warnings = build_store(config)
    out_path = out or config.paths["store_out"]
    store.write(out_path)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote store {store.build_id} with {len(store.insights)} cohorts to {out_path}")
    if "previous_store" in config.paths:
        previous = InsightStore.read(config.paths["previous_store"])
        report = diff_stores(
            store,
            previous,
            config.params["diff_count_threshold"],
            config.params["diff_median_threshold"],
        )
        for flag in report.flags:
            print(f"sanity flag: {flag}", file=sys.stderr)
        if report.flagged:
            return 2
    return 0


def cmd_diff(config: Config, new_path: str, old_path: str, out: str | None) -> int:
    report = diff_stores(
        InsightStore.read(new_path),
        InsightStore.read(old_path),
        config.params["diff_count_threshold"],
        config.params["diff_median_threshold"],
    )
    _write_json(out, asdict(report))
    return 2 if report.flagged else 0


def cmd_tune(config: Config, out: str | None, seed: int) -> int:
    cohorts, _report, _diag = clean_cohorts(config)
    params = smoothing_params(config)
    priors = train_priors_from_cohorts(
        cohorts, lam=config.params["lambda"], h=params.h, k_min=config.params["k_min"]
    )
    values = type_values(cohorts, config.params["k_min"])[CompensationType.BASE_SALARY]
    split = make_split(values, params.h, fraction=0.1, seed=seed)
    grid = GridSpec()
    result = grid_search(
        values, split, grid, params.h,
        priors.for_type(CompensationType.BASE_SALARY),
    )
    out_path = out or "tuning_ll.csv"
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["delta", "eta", "segment", "LL"])
        for d, e, ll in result.table:
            w.writerow([d, e, "all", ll])
        w.writerow([result.delta_star, result.eta_star, "argmax", result.best_ll])
    print(f"optimal delta={result.delta_star}, eta={result.eta_star}")
    return 0


def cmd_serve(config: Config, store_path: str | None, host: str, port: int) -> int:
    import uvicorn

    from .service import InsightService, create_app

    store = InsightStore.read(store_path or config.paths["store_out"])
    service = InsightService(store, tuple(config.params["generalization_order"]))
    app = create_app(service, config.params.get("api_token"))
    uvicorn.run(app, host=host, port=port)
    return 0


def _base_values(config: Config):
    cohorts, _report, _diag = clean_cohorts(config)
    return type_values(cohorts, config.params["k_min"])[CompensationType.BASE_SALARY]


def cmd_eval_perturb(config: Config, mode: str, out: str | None, seed: int) -> int:
    values = _base_values(config)
    rows = perturbation_study(values, mode, seed=seed)
    out_path = out or f"perturbation_{mode}.csv"
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["mode", "fraction", "added_removed_pct", "original_removed_pct",
             "d_p10_pct", "d_median_pct", "d_p90_pct"]
        )
        for r in rows:
            w.writerow(
                [r.mode, r.fraction, r.added_removed_pct, r.original_removed_pct,
                 r.d_p10_pct, r.d_median_pct, r.d_p90_pct]
            )
    print(f"wrote {out_path} (synthetic-scale study; compare patterns, not levels)")
    return 0


def cmd_eval_coverage(config: Config, out: str | None, seed: int) -> int:
    cohorts, _report, _diag = clean_cohorts(config)
    params = smoothing_params(config)
    priors = train_priors_from_cohorts(
        cohorts, lam=config.params["lambda"], h=params.h, k_min=config.params["k_min"]
    )
    values = type_values(cohorts, config.params["k_min"])[CompensationType.BASE_SALARY]
    report = coverage_test(
        values, params, priors.for_type(CompensationType.BASE_SALARY), seed=seed
    )
    _write_json(
        out,
        {
            "ideal": report.beta - report.alpha,
            "mean_covered_smoothed": report.mean_covered("smoothed"),
            "mean_covered_empirical": report.mean_covered("empirical"),
            "cohorts": len(report.cohorts),
        },
    )
    return 0


def cmd_eval_qq(config: Config, out: str | None, n_points: int) -> int:
    values = [v for vs in _base_values(config).values() for v in vs]
    raw_pts, log_pts = qq_points(values, n_points)
    out_path = out or "qq_points.csv"
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["scale", "theoretical_quantile", "sample_quantile"])
        for z, q in raw_pts:
            w.writerow(["raw", z, q])
        for z, q in log_pts:
            w.writerow(["log", z, q])
    print(f"wrote {out_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="payinsights")
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="output path override")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("ingest", "outliers", "aggregate", "smooth", "build", "tune"):
        sub.add_parser(name)
    diff_p = sub.add_parser("diff")
    diff_p.add_argument("new_store")
    diff_p.add_argument("old_store")
    serve_p = sub.add_parser("serve")
    serve_p.add_argument("--store", default=None)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    eval_p = sub.add_parser("eval")
    eval_sub = eval_p.add_subparsers(dest="eval_command", required=True)
    perturb_p = eval_sub.add_parser("perturb")
    perturb_p.add_argument(
        "--mode", choices=("min-wage", "two-million", "uniform-in-range"),
        default="two-million",
    )
    eval_sub.add_parser("coverage")
    qq_p = eval_sub.add_parser("qq")
    qq_p.add_argument("--n-points", type=int, default=100)

    args = parser.parse_args(argv)
    try:
        config = Config.load(args.config)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    seed = args.seed if args.seed is not None else config.seed

    try:
        if args.command == "ingest":
            return cmd_ingest(config, args.out)
        if args.command == "outliers":
            return cmd_outliers(config, args.out)
        if args.command in ("aggregate", "smooth", "build"):
            # aggregate and smooth are staged views of the same computation;
            # both produce the full draft store without overrides applied.
            return cmd_build(config, args.out)
        if args.command == "tune":
            return cmd_tune(config, args.out, seed)
        if args.command == "diff":
            return cmd_diff(config, args.new_store, args.old_store, args.out)
        if args.command == "serve":
            return cmd_serve(config, args.store, args.host, args.port)
        if args.command == "eval":
            if args.eval_command == "perturb":
                return cmd_eval_perturb(config, args.mode, args.out, seed)
            if args.eval_command == "coverage":
                return cmd_eval_coverage(config, args.out, seed)
            if args.eval_command == "qq":
                return cmd_eval_qq(config, args.out, args.n_points)
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
