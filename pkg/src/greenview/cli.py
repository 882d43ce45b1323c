"""Operator-facing command line: segment, gvi, evaluate, convert-cityscapes,
sample-points, benchmark, export-geojson.

Every command is idempotent given identical inputs and --seed; re-runs
overwrite outputs byte-identically, and --workers only changes wall time.
Logs go to stderr; results go to stdout or files. Single-file outputs are
written via a temp file and atomically renamed, and an interrupted run
removes whatever it had produced.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
import time
from pathlib import Path

from . import geo
from .config import PipelineConfig, apply_overrides, load_config, parse_backend_spec
from .dataset import SampleManifest, convert_cityscapes, load_manifest, save_manifest
from .errors import GreenViewError
from .gvi import GviMeasurement, aggregate
from .imaging import decode_image, mask_from_png, mask_to_png
from .inference import (
    BaselineEstimator,
    Estimator,
    EstimateResult,
    open_mask_backend,
    open_model_backend,
    run_pool,
)
from .metrics import PairedSample, evaluate, pooled_iou, render_table

log = logging.getLogger("greenview")

# Published per-10k-image timings for the classical and end-to-end methods,
# printed as context in benchmark output; never asserted.
REFERENCE_TIMINGS_S_PER_10K = {"threshold and cluster": 3665.0, "dcnn end-to-end": 38.9}


def make_estimator(cfg: PipelineConfig) -> Estimator:
    if cfg.backend_kind == "baseline":
        return BaselineEstimator(cfg.baseline)
    if cfg.backend_kind == "mask_dir":
        return open_mask_backend(cfg.backend_path)
    return open_model_backend(cfg.backend_path, cfg.model_kind)


def backend_label(cfg: PipelineConfig) -> str:
    if cfg.backend_kind == "baseline":
        return "threshold and cluster"
    if cfg.backend_kind == "mask_dir":
        return f"mask backend ({Path(cfg.backend_path).name})"
    return f"model ({Path(cfg.backend_path).name}, {cfg.model_kind})"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _estimate_manifest(
    manifest: SampleManifest, estimator: Estimator, workers: int
) -> tuple[list[EstimateResult], dict[str, int]]:
    """Run the estimator over every entry; results sorted by id.

    Also returns per-image pixel totals (for pooled aggregation weights).
    """
    entries = sorted(manifest, key=lambda e: e.id)
    pixel_totals: dict[str, int] = {}

    def one(entry) -> EstimateResult:
        img = decode_image(entry.image_path, id=entry.id)
        pixel_totals[entry.id] = img.width * img.height  # per-key write, thread-safe
        return estimator.estimate(img)

    return run_pool(entries, one, workers), pixel_totals


def cmd_segment(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    estimator = make_estimator(cfg)
    if not estimator.produces_mask:
        raise GreenViewError("segment requires a mask-producing backend")
    out_dir = Path(args.out_masks)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for city in manifest.cities():
            entries = [e for e in manifest if e.city == city]
            sub = SampleManifest(entries=tuple(entries))
            results, _ = _estimate_manifest(sub, estimator, cfg.workers)
            for res in results:
                path = out_dir / f"{res.id}.png"
                mask_to_png(res.mask, path)
                written.append(path)
            log.info("segmented %s: %d images", city, len(results))
    except KeyboardInterrupt:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return 0


def _aggregate_rows(
    manifest: SampleManifest,
    results: list[EstimateResult],
    pixel_totals: dict[str, int],
    pool_pixels: bool,
) -> tuple[list[tuple], list[tuple]]:
    """Point rows (point_id, city, gvi) and city rows (city, gvi) from
    per-image results; measurement lists are id-sorted before reduction."""
    by_id = {e.id: e for e in manifest}
    point_groups: dict[str, list[EstimateResult]] = {}
    for res in results:  # results are id-sorted already
        entry = by_id[res.id]
        point_groups.setdefault(entry.point_id or entry.id, []).append(res)

    point_rows = []
    city_groups: dict[str, list[tuple[GviMeasurement, float]]] = {}
    for point_id in sorted(point_groups):
        group = point_groups[point_id]
        weights = [float(pixel_totals[r.id]) for r in group] if pool_pixels else None
        measurement = aggregate([r.gvi for r in group], "point", weights=weights)
        city = by_id[group[0].id].city
        point_rows.append((point_id, city, measurement))
        city_groups.setdefault(city, []).append(
            (measurement, float(sum(pixel_totals[r.id] for r in group)))
        )

    city_rows = []
    for city in sorted(city_groups):
        pairs = city_groups[city]
        weights = [w for _, w in pairs] if pool_pixels else None
        city_rows.append((city, aggregate([m for m, _ in pairs], "city", weights=weights)))
    return point_rows, city_rows


def cmd_gvi(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    estimator = make_estimator(cfg)
    results, pixel_totals = _estimate_manifest(manifest, estimator, cfg.workers)
    by_id = {e.id: e for e in manifest}

    out = Path(args.out)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "point_id", "city", "gvi", "source"])
    for res in results:
        entry = by_id[res.id]
        writer.writerow(
            [res.id, entry.point_id or "", entry.city, repr(res.gvi.value), res.gvi.source]
        )
    _write_atomic(out, buf.getvalue())

    point_rows, city_rows = _aggregate_rows(manifest, results, pixel_totals, args.pool_pixels)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["point_id", "city", "gvi", "n_images", "source"])
    for point_id, city, m in point_rows:
        writer.writerow([point_id, city, repr(m.value), m.n_images, m.source])
    _write_atomic(out.with_name(out.stem + ".points.csv"), buf.getvalue())

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["city", "gvi", "n_images", "source"])
    for city, m in city_rows:
        writer.writerow([city, repr(m.value), m.n_images, m.source])
    _write_atomic(out.with_name(out.stem + ".cities.csv"), buf.getvalue())

    log.info("wrote %s (+ .points/.cities companions), %d images", out, len(results))
    return 0


def _paired_samples(
    manifest: SampleManifest, results: list[EstimateResult]
) -> list[PairedSample]:
    by_id = {e.id: e for e in manifest}
    samples = []
    for res in results:
        entry = by_id[res.id]
        if entry.true_gvi is None:
            raise GreenViewError(f"entry {entry.id} lacks true_gvi; evaluate needs labels")
        true_mask = mask_from_png(entry.label_mask_path) if entry.label_mask_path else None
        samples.append(
            PairedSample(
                id=res.id,
                predicted_gvi=res.gvi.value,
                true_gvi=entry.true_gvi,
                predicted_mask=res.mask,
                true_mask=true_mask,
            )
        )
    return samples


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    estimator = make_estimator(cfg)
    log.info("evaluating %s: %d entries, backend %s", args.manifest, len(manifest), backend_label(cfg))
    results, _ = _estimate_manifest(manifest, estimator, cfg.workers)
    samples = _paired_samples(manifest, results)
    report = evaluate(samples, quantiles=cfg.quantiles)
    if args.pooled_iou:
        try:
            log.info("dataset-pooled IoU: %.3f%%", pooled_iou(samples))
        except GreenViewError as exc:
            log.warning("pooled IoU unavailable: %s", exc)

    out = Path(args.out_report)
    _write_atomic(out, report.to_json())
    table = render_table([(backend_label(cfg), report)])
    _write_atomic(out.with_suffix(".txt"), table)
    sys.stdout.write(table)
    return 0


def cmd_benchmark(args, cfg: PipelineConfig) -> int:
    manifest = load_manifest(args.manifest)
    estimator = make_estimator(cfg)
    entries = sorted(manifest, key=lambda e: e.id)
    images = run_pool(entries, lambda e: decode_image(e.image_path, id=e.id), cfg.workers)
    n = len(images)
    if n == 0:
        raise GreenViewError("benchmark needs a non-empty manifest")

    walls = []
    for _ in range(args.repeats):
        start = time.perf_counter()
        run_pool(images, estimator.estimate, cfg.workers)
        walls.append(time.perf_counter() - start)
    median_wall = statistics.median(walls)
    per_image = median_wall / n
    report = {
        "backend": backend_label(cfg),
        "n_images": n,
        "workers": cfg.workers,
        "repeats": args.repeats,
        "wall_s": walls,
        "median_wall_s": median_wall,
        "images_per_sec": n / median_wall if median_wall > 0 else float("inf"),
        "seconds_per_10k_images": per_image * 10_000,
        "hours_per_1m_images": per_image * 1_000_000 / 3600.0,
    }
    print(json.dumps(report, indent=2))
    for name, ref in REFERENCE_TIMINGS_S_PER_10K.items():
        log.info("reference timing (published, not asserted): %s ~ %g s per 10k images", name, ref)
    return 0


def cmd_convert_cityscapes(args, cfg: PipelineConfig) -> int:
    manifest = convert_cityscapes(
        args.labels,
        args.images,
        args.out_masks,
        vegetation_label_id=args.vegetation_id,
        workers=cfg.workers,
    )
    save_manifest(manifest, args.out_manifest)
    log.info("converted %d label rasters -> %s", len(manifest), args.out_manifest)
    return 0


def cmd_sample_points(args, cfg: PipelineConfig) -> int:
    network = geo.load_street_network(args.network)
    headings = tuple(float(h) for h in args.headings.split(",")) if args.headings else geo.DEFAULT_HEADINGS
    points = geo.sample_points(
        network, args.interval_m, seed=cfg.seed, headings=headings, jitter_m=args.jitter_m
    )
    if args.subsample is not None:
        points = geo.random_subsample(points, args.subsample, cfg.seed)
    features = []
    for p in points:
        lat, lon = p.location
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": {
                    "point_id": p.point_id,
                    "segment_id": p.segment_id,
                    "headings": list(p.requested_headings),
                },
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    _write_atomic(Path(args.out), json.dumps(doc, indent=2) + "\n")
    log.info("sampled %d points from %d segments", len(points), len(network.segments))
    return 0


def cmd_export_geojson(args, cfg: PipelineConfig) -> int:
    with open(args.points, encoding="utf-8") as fh:
        doc = json.load(fh)
    points = {}
    for feat in doc.get("features", []):
        props = feat.get("properties", {})
        lon, lat = feat["geometry"]["coordinates"]
        point = geo.SamplePoint(
            point_id=props["point_id"],
            location=(lat, lon),
            segment_id=props.get("segment_id", props["point_id"]),
            requested_headings=tuple(props.get("headings", geo.DEFAULT_HEADINGS)),
        )
        points[point.point_id] = point

    results = []
    with open(args.gvi_csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            point_id = row["point_id"]
            if point_id not in points:
                raise GreenViewError(f"{args.gvi_csv}: unknown point_id {point_id!r}")
            measurement = GviMeasurement(
                value=float(row["gvi"]),
                scope="point",
                n_images=int(row.get("n_images", 1)),
                source=row.get("source", "baseline"),
            )
            results.append((points[point_id], measurement))
    results.sort(key=lambda pair: pair[0].point_id)
    geo.export_geojson(results, args.out)
    log.info("exported %d features -> %s", len(results), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greenview",
        description="Batch Green View Index pipeline: segmentation, GVI, evaluation, benchmarking.",
    )
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--workers", type=int, help="worker lanes (default from config, else 1)")
    parser.add_argument("--seed", type=int, help="deterministic seed override")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--backend", help="baseline | mask_dir:PATH | model:PATH[:segmentation|regression]")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="write one vegetation mask PNG per manifest entry")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-masks", required=True)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("gvi", help="per-image GVI CSV plus point/city aggregates")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="per-image CSV; companions get .points/.cities suffixes")
    p.add_argument("--pool-pixels", action="store_true",
                   help="aggregate by pooled pixel counts instead of unweighted means")
    p.set_defaults(fn=cmd_gvi)

    p = sub.add_parser("evaluate", help="metric report against manifest labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-report", required=True, help="report JSON; aligned table lands beside it as .txt")
    p.add_argument("--pooled-iou", action="store_true", help="also log the dataset-pooled IoU")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("benchmark", help="throughput over a manifest with extrapolations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("convert-cityscapes", help="collapse multi-class labels to binary vegetation")
    p.add_argument("--labels", required=True, help="directory of <city>/<name>_labelIds.png")
    p.add_argument("--images", required=True, help="directory of <city>/<name>_leftImg8bit.png")
    p.add_argument("--out-masks", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--vegetation-id", type=int, default=21)
    p.set_defaults(fn=cmd_convert_cityscapes)

    p = sub.add_parser("sample-points", help="place points along a GeoJSON street network")
    p.add_argument("--network", required=True)
    p.add_argument("--interval-m", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--headings", help="comma-separated headings, default 0,60,120,180,240,300")
    p.add_argument("--jitter-m", type=float, default=0.0)
    p.add_argument("--subsample", type=int, help="keep k points uniformly at random")
    p.set_defaults(fn=cmd_sample_points)

    p = sub.add_parser("export-geojson", help="join sampled points with point GVI into GeoJSON")
    p.add_argument("--points", required=True, help="sample-points output GeoJSON")
    p.add_argument("--gvi-csv", required=True, help="per-point CSV from the gvi command")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export_geojson)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(asctime)s %(name)s %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    )
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        overrides = {"workers": args.workers, "seed": args.seed}
        if args.backend:
            overrides.update(parse_backend_spec(args.backend))
        cfg = apply_overrides(cfg, **overrides)
        return args.fn(args, cfg)
    except GreenViewError as exc:
        log.error("%s", exc)
        return 1
    except KeyboardInterrupt:
        log.error("interrupted; partial outputs removed")
        return 130


if __name__ == "__main__":
    sys.exit(main())
