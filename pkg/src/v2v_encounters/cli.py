"""Command-line entry point: synth, ingest, mine, cluster, report, bench.

Data artifacts go to files only; progress and statistics go to stderr.
Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import artifacts, synthgen
from .clustering import evaluate_accuracy, kmedoids
from .config import PipelineConfig, build_config, load_config_file
from .encounters import find_encounters
from .errors import EncounterError
from .features import NORMALIZATIONS, decimate, dtw_matrix, extract_features, normalize
from .ingest import collect_inputs, load_trip_store, parse_trip_files, qualify_trips, write_trip_store
from .matcher import brute_force_match, sort_trips, sweep_match, write_pairs_csv

log = logging.getLogger("v2v_encounters")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _stderr_json(obj) -> None:
    print(json.dumps(obj, indent=2), file=sys.stderr)


def _check_distinct(src: Path, dst: Path) -> None:
    if src.resolve() == dst.resolve():
        raise UsageError(f"input and output paths must differ: {src}")


def _config(args) -> PipelineConfig:
    overrides = {
        "seed": args.seed,
        "threads": getattr(args, "threads", None),
        "margin": getattr(args, "margin", None),
        "min_trip_samples": getattr(args, "min_samples", None),
        "skip_coarse": True if getattr(args, "skip_coarse", False) else None,
        "oracle_check": True if getattr(args, "oracle_check", False) else None,
        "region": {
            "lat_min": getattr(args, "lat_min", None), "lat_max": getattr(args, "lat_max", None),
            "lon_min": getattr(args, "lon_min", None), "lon_max": getattr(args, "lon_max", None),
        },
        "filter": {
            "coarse_radius": getattr(args, "coarse_radius", None),
            "encounter_radius": getattr(args, "encounter_radius", None),
            "min_duration": getattr(args, "min_duration", None),
            "merge_gap": getattr(args, "merge_gap", None),
        },
        "dtw": {
            "window": getattr(args, "window", None),
            "max_points": getattr(args, "max_points", None),
            "normalization": getattr(args, "normalization", None),
        },
        "cluster": {"k": getattr(args, "k", None), "max_iter": getattr(args, "max_iter", None)},
    }
    try:
        file_values = load_config_file(args.config) if args.config else {}
        return build_config(file_values, overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_synth(args, cfg: PipelineConfig) -> int:
    summary = synthgen.generate_corpus(
        args.out, args.n_per_kind, cfg.sub_seed("synth"), noise_sigma=args.noise, bounds=cfg.region,
    )
    _stderr_json({"synth": summary})
    return EXIT_OK


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    src, out = Path(args.input), Path(args.out)
    _check_distinct(src, out)
    parsed = parse_trip_files(collect_inputs(src), strict=not src.is_dir())
    trips, report = qualify_trips(parsed, cfg.region, cfg.min_trip_samples)
    out.mkdir(parents=True, exist_ok=True)
    for stale in out.glob("*.csv"):
        stale.unlink()
    write_trip_store(trips, out)
    artifacts.write_json(out / "qualification_report.json", "qualification_report", report.to_dict())
    _stderr_json({"qualification": report.to_dict(), "skipped_files": list(parsed.skipped_files)})
    return EXIT_OK


def cmd_mine(args, cfg: PipelineConfig) -> int:
    src, out = Path(args.input), Path(args.out)
    _check_distinct(src, out)
    if not src.is_dir():
        raise FileNotFoundError(f"trip store not found: {src}")
    trips = sort_trips(load_trip_store(src))
    t0 = time.perf_counter()
    pairs, mstats = sweep_match(trips, cfg.margin)
    sweep_s = time.perf_counter() - t0
    stats = {"match": {**mstats.to_dict(), "seconds": sweep_s}}

    if cfg.oracle_check:
        t0 = time.perf_counter()
        oracle, ostats = brute_force_match(trips, cfg.margin)
        stats["oracle"] = {
            "brute_force_comparisons": ostats.comparisons,
            "comparisons_saved": ostats.comparisons - mstats.comparisons,
            "seconds": time.perf_counter() - t0,
            "equal": oracle == pairs,
        }
        if oracle != pairs:
            _stderr_json(stats)
            raise EncounterError(
                f"oracle check failed: sweep found {len(pairs)} pairs, brute force {len(oracle)}"
            )

    out.mkdir(parents=True, exist_ok=True)
    write_pairs_csv(pairs, out / "trip_pairs.csv")
    encounters, fstats = find_encounters(
        pairs, trips, cfg.filter, skip_coarse=cfg.skip_coarse, threads=cfg.threads,
    )
    artifacts.write_encounters(encounters, out)
    stats["filter"] = fstats.to_dict()
    _stderr_json(stats)
    if args.stats_out:
        Path(args.stats_out).write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_cluster(args, cfg: PipelineConfig) -> int:
    src, out = Path(args.input), Path(args.out)
    _check_distinct(src, out)
    encounters = artifacts.read_encounters(src)
    labels = artifacts.read_labels(args.labels, encounters) if args.labels else None

    out.mkdir(parents=True, exist_ok=True)
    feat_dir = out / "features"
    feat_dir.mkdir(exist_ok=True)
    for stale in feat_dir.glob("enc_*.csv"):
        stale.unlink()
    series, index = [], []
    for i, enc in enumerate(encounters):
        fs = extract_features(enc)
        artifacts.write_feature_csv(fs, feat_dir / f"enc_{i:05d}.csv")
        pts, factor = decimate(normalize(fs), cfg.dtw.max_points)
        series.append(pts)
        index.append({"row": i, "encounter_id": enc.id, "n_points": len(fs), "decimation_factor": factor})

    t0 = time.perf_counter()
    matrix = dtw_matrix(series, cfg.dtw.window, cfg.dtw.normalization, threads=cfg.threads)
    dtw_s = time.perf_counter() - t0
    artifacts.write_dtw_matrix(out / "dtw_matrix.bin", matrix)
    dtw_opts = {"window": cfg.dtw.window, "max_points": cfg.dtw.max_points, "normalization": cfg.dtw.normalization}
    artifacts.write_json(out / "dtw_index.json", "dtw_index", {"dtw": dtw_opts, "rows": index})

    seed = cfg.sub_seed("cluster")
    ids = [e.id for e in encounters]
    result = kmedoids(matrix, cfg.cluster.k, seed=seed, max_iter=cfg.cluster.max_iter, ids=ids) if ids else None
    artifacts.write_json(
        out / "clusters.json", "clusters",
        artifacts.clusters_payload(result, cfg.cluster.k, seed, cfg.seed, {"dtw": dtw_opts}),
    )
    summary = {"encounters": len(ids), "dtw_seconds": dtw_s}
    if result is not None:
        summary.update(objective=result.objective, iterations=result.iterations)
    if labels is not None and result is not None:
        report = evaluate_accuracy(result, labels)
        artifacts.write_json(out / "accuracy.json", "accuracy", report.to_dict())
        summary["accuracy"] = report.to_dict()["per_cluster"]
    _stderr_json({"cluster": summary})
    return EXIT_OK


def cmd_report(args, cfg: PipelineConfig) -> int:
    src, enc_dir, out = Path(args.input), Path(args.encounters), Path(args.out)
    _check_distinct(src, out)
    clusters = artifacts.read_json(src / "clusters.json", "clusters")
    encounters = {e.id: e for e in artifacts.read_encounters(enc_dir)}
    assignment = clusters["assignment"]
    missing = set(assignment) - set(encounters)
    if missing:
        raise EncounterError(f"{len(missing)} clustered encounter(s) not found under {enc_dir}")
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "feature_space.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["encounter_id", "cluster", "n_samples", "duration_s", "mean_L_m", "mean_theta_deg", "min_L_m"])
        for enc_id, c in assignment.items():
            fs = extract_features(encounters[enc_id])
            w.writerow([
                enc_id, c, len(fs), repr(len(fs) / 10.0),
                repr(float(np.mean(fs.distance))), repr(float(np.mean(fs.theta))), repr(float(np.min(fs.distance))),
            ])

    for c in range(int(clusters["k"])):
        features = []
        for enc_id, cc in assignment.items():
            if cc != c:
                continue
            enc = encounters[enc_id]
            for side, trip, lat, lon in (("a", enc.trip_a, enc.lat_a, enc.lon_a), ("b", enc.trip_b, enc.lat_b, enc.lon_b)):
                features.append({
                    "type": "Feature",
                    "geometry": {"type": "LineString", "coordinates": [[float(x), float(y)] for x, y in zip(lon, lat)]},
                    "properties": {"encounter_id": enc_id, "cluster": c, "vehicle": side, "trip": trip},
                })
        doc = {"type": "FeatureCollection", "features": features}
        (out / f"cluster_{c}.geojson").write_text(json.dumps(doc) + "\n", encoding="utf-8")
    _stderr_json({"report": {"encounters": len(assignment), "clusters": int(clusters["k"])}})
    return EXIT_OK


def cmd_bench(args, cfg: PipelineConfig) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = []
    seed = cfg.sub_seed("bench")
    for n in sizes:
        spans = sort_trips(synthgen.concurrency_workload(n, args.concurrency, seed=seed))
        t0 = time.perf_counter()
        pairs, sstats = sweep_match(spans, cfg.margin)
        sweep_s = time.perf_counter() - t0
        row = {"n": n, "sweep_comparisons": sstats.comparisons, "sweep_seconds": sweep_s,
               "peak_queue_len": sstats.peak_queue_len, "pairs": len(pairs)}
        if n <= args.brute_max:
            t0 = time.perf_counter()
            oracle, bstats = brute_force_match(spans, cfg.margin)
            row.update(brute_comparisons=bstats.comparisons, brute_seconds=time.perf_counter() - t0,
                       equal=oracle == pairs)
        rows.append(row)
        print(
            f"n={n:>7}  sweep={sstats.comparisons:>9} ({sstats.comparisons / n:.2f}/trip)"
            + (f"  brute={row['brute_comparisons']:>11}" if "brute_comparisons" in row else ""),
            file=sys.stderr,
        )
    if args.out:
        Path(args.out).write_text(json.dumps({"concurrency": args.concurrency, "rows": rows}, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (flags override it)")
    common.add_argument("--seed", type=int, help="pipeline seed; stages derive their own sub-seeds")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="v2v-encounters", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-kind", type=int, default=10)
    p.add_argument("--noise", type=float, default=1.0, help="GPS noise sigma, meters")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="qualify raw trip logs")
    p.add_argument("--in", dest="input", required=True, help="CSV file or directory of CSVs")
    p.add_argument("--out", required=True)
    for name in ("lat-min", "lat-max", "lon-min", "lon-max"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--min-samples", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mine", parents=[common], help="match, coarse- and fine-filter encounters")
    p.add_argument("--in", dest="input", required=True, help="qualified trip store")
    p.add_argument("--out", required=True)
    p.add_argument("--margin", type=float, help="bounding-box margin, meters")
    p.add_argument("--coarse-radius", type=float)
    p.add_argument("--encounter-radius", type=float)
    p.add_argument("--min-duration", type=int, help="deciseconds")
    p.add_argument("--merge-gap", type=int, help="deciseconds")
    p.add_argument("--skip-coarse", action="store_true")
    p.add_argument("--oracle-check", action="store_true", help="verify the sweep against brute force")
    p.add_argument("--stats-out")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("cluster", parents=[common], help="DTW matrix and k-medoids clustering")
    p.add_argument("--in", dest="input", required=True, help="output directory of `mine`")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="labels.csv (encounter_id,label or trip_a,trip_b,label)")
    p.add_argument("--k", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--window", type=int, help="Sakoe-Chiba half-width in samples")
    p.add_argument("--max-points", type=int, help="decimate longer series to this many points")
    p.add_argument("--normalization", choices=NORMALIZATIONS)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("report", parents=[common], help="plot-ready exports")
    p.add_argument("--in", dest="input", required=True, help="output directory of `cluster`")
    p.add_argument("--encounters", required=True, help="output directory of `mine`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", parents=[common], help="matcher scaling measurement")
    p.add_argument("--sizes", default="1000,2000,4000,8000")
    p.add_argument("--concurrency", type=int, default=10)
    p.add_argument("--brute-max", type=int, default=8000)
    p.add_argument("--margin", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EncounterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
