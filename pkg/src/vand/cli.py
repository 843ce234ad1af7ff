"""Command-line interface: run the pipeline, evaluate runs, warm caches.

``run`` writes, per sample, a 16-bit grayscale heatmap PNG plus a row in
``scores.csv``, and a ``run_meta.json`` that suffices to reproduce the run.
``eval`` reads those artifacts back together with the dataset ground truth
and writes the report tables (JSON, text, CSV) and a summary figure.
Outputs are byte-identical across runs for a deterministic backend and a
fixed seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from . import __version__
from .aggregate import SampleResult
from .backends import (
    Backend,
    BackendError,
    EmbeddingCache,
    MockBackend,
    ServerBackend,
    TransportError,
    default_cache_dir,
)
from .backends.server import BackendServer
from .core import ImageSample, PipelineConfig
from .evaluation import (
    evaluate_class,
    format_report_table,
    load_dataset,
    render_report_figure,
    report_table_csv,
    summarize_reports,
)
from .pipeline import embed_ensemble, process_sample
from .prompts import compose_ensemble, load_templates

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_TRANSPORT = 3

HEATMAP_SCALE = 65535
VALID_METRICS = {"f1max", "auroc"}


def object_name_for(class_name: str) -> str:
    return class_name.replace("_", " ")


def build_backend(args: argparse.Namespace) -> Backend:
    if args.backend == "mock":
        return MockBackend(seed=args.seed)
    if not args.server_url:
        raise UsageError("--backend server requires --server-url")
    return ServerBackend(args.server_url)


class UsageError(Exception):
    pass


def _load_config(path: Optional[str]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        return PipelineConfig.from_file(path)
    except (OSError, ValueError, json.JSONDecodeError) as err:
        raise UsageError(f"bad config file {path}: {err}") from err


def save_heatmap(anomaly_map: np.ndarray, path: Path) -> None:
    raw = np.rint(np.clip(anomaly_map, 0.0, 1.0) * HEATMAP_SCALE).astype(np.uint16)
    Image.fromarray(raw).save(path)


def load_heatmap(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.float64) / HEATMAP_SCALE


def heatmap_path(out_dir: Path, sample_id: str) -> Path:
    return out_dir / "heatmaps" / f"{sample_id}.png"


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    templates = load_templates(args.templates)
    out_dir = Path(args.out)
    backend = build_backend(args)
    cache = EmbeddingCache(args.cache_dir) if args.cache_dir else EmbeddingCache(default_cache_dir())

    samples = load_dataset(args.data, args.class_name)
    if not samples:
        raise UsageError(f"no samples for class {args.class_name!r} under {args.data}")

    ensemble = compose_ensemble(object_name_for(args.class_name), templates)
    embeddings = embed_ensemble(backend, ensemble, cache)

    def work(sample: ImageSample):
        return process_sample(sample, backend, ensemble, embeddings, config)

    results: dict[str, SampleResult] = {}
    failures: list[dict] = []
    transport_failures = 0
    serial = not backend.descriptor.concurrent_safe or args.workers <= 1
    if serial:
        outcomes = [(s, _attempt(work, s)) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(zip(samples, pool.map(lambda s: _attempt(work, s), samples)))
    for sample, (result, error) in outcomes:
        if error is not None:
            logger.error("sample %s failed: %s", sample.id, error)
            failures.append({"sample_id": sample.id, "error": str(error)})
            if isinstance(error, TransportError):
                transport_failures += 1
        else:
            results[sample.id] = result

    (out_dir / "heatmaps").mkdir(parents=True, exist_ok=True)
    for sample_id in sorted(results):
        save_heatmap(results[sample_id].anomaly_map, heatmap_path(out_dir, sample_id))

    by_id = {s.id: s for s in samples}
    with open(out_dir / "scores.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "sample_score", "label"])
        for sample_id in sorted(results):
            label = by_id[sample_id].label
            writer.writerow(
                [sample_id, repr(results[sample_id].sample_score), "" if label is None else label]
            )

    meta = {
        "class": args.class_name,
        "config": config.to_dict(),
        "backend": backend.descriptor.to_dict(),
        "seed": args.seed,
        "code_version": __version__,
        "n_samples": len(samples),
        "n_failed": len(failures),
        "failures": sorted(failures, key=lambda f: f["sample_id"]),
        "prompt_counts": {
            "normal": len(ensemble.normal_prompts),
            "abnormal": len(ensemble.abnormal_prompts),
            "localizing": len(ensemble.localizing_prompts),
        },
    }
    with open(out_dir / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if not results:
        return EXIT_TRANSPORT if failures and transport_failures == len(failures) else EXIT_FAILURE
    return EXIT_OK


def _attempt(fn, sample):
    try:
        return fn(sample), None
    except BackendError as err:
        return None, err


def cmd_eval(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    scores_path = out_dir / "scores.csv"
    if not scores_path.exists():
        raise UsageError(f"no scores.csv under {out_dir}; run the pipeline first")
    metrics = tuple(args.metric.split(","))
    bad = set(metrics) - VALID_METRICS
    if bad:
        raise UsageError(f"unknown metrics: {sorted(bad)} (choose from {sorted(VALID_METRICS)})")

    scores: dict[str, float] = {}
    with open(scores_path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            scores[row["sample_id"]] = float(row["sample_score"])

    samples = load_dataset(args.data, args.class_name)
    results = []
    kept_samples = []
    for sample in samples:
        if sample.id not in scores:
            logger.warning("sample %s has no score row; excluded from evaluation", sample.id)
            continue
        needs_pixels = sample.gt_mask is not None or sample.label == 0
        anomaly_map = None
        if needs_pixels:
            hm = heatmap_path(out_dir, sample.id)
            if not hm.exists():
                raise UsageError(f"missing heatmap for sample {sample.id}: {hm}")
            anomaly_map = load_heatmap(hm)
            if anomaly_map.shape != sample.shape:
                raise UsageError(
                    f"heatmap {hm} has shape {anomaly_map.shape}, expected {sample.shape}"
                )
        results.append(
            SampleResult(
                sample_id=sample.id,
                anomaly_map=anomaly_map,
                sample_score=scores[sample.id],
            )
        )
        kept_samples.append(sample)
    if not results:
        raise UsageError(f"output dir {out_dir} contains no evaluable samples")

    report = evaluate_class(
        results, kept_samples, bins=args.bins, metrics=metrics, exact_pixel=args.exact
    )
    reports = [report]
    summary = summarize_reports(reports)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = format_report_table(reports)
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    (out_dir / "report.csv").write_text(report_table_csv(reports), encoding="utf-8")
    render_report_figure(reports, out_dir / "report.png")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_cache(args: argparse.Namespace) -> int:
    cache_dir = Path(args.cache_dir) if args.cache_dir else default_cache_dir()
    cache = EmbeddingCache(cache_dir)
    if args.clear:
        cache.clear()
        print(f"cleared embedding cache at {cache_dir}")
        if not args.class_name:
            return EXIT_OK
    if not args.class_name:
        raise UsageError("cache needs --class (or --clear)")
    templates = load_templates(args.templates)
    backend = build_backend(args)
    for class_name in args.class_name.split(","):
        ensemble = compose_ensemble(object_name_for(class_name), templates)
        embed_ensemble(backend, ensemble, cache)
        n = len(ensemble.normal_prompts) + len(ensemble.abnormal_prompts)
        print(f"cached {n} prompt embeddings for class {class_name!r}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    backend = MockBackend(seed=args.seed)
    server = BackendServer(backend, host=args.host, port=args.port)
    print(f"serving mock backend at {server.url}")
    server.serve_forever()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vand",
        description="Zero-shot visual anomaly detection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_backend_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--backend", choices=["mock", "server"], default="mock")
        p.add_argument("--server-url", default=None, help="model server URL for --backend server")
        p.add_argument("--seed", type=int, default=0, help="seed for the mock backend")
        p.add_argument("--cache-dir", default=os.environ.get("VAND_CACHE_DIR"),
                       help="embedding cache directory (default: $VAND_CACHE_DIR)")
        p.add_argument("--templates", default=None, help="prompt template JSON document")

    run_p = sub.add_parser("run", help="run the pipeline over one dataset class")
    run_p.add_argument("--data", required=True, help="dataset root directory")
    run_p.add_argument("--class", dest="class_name", required=True, help="object class name")
    run_p.add_argument("--config", default=None, help="pipeline config JSON file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--workers", type=int, default=1, help="worker threads over samples")
    add_backend_flags(run_p)
    run_p.set_defaults(func=cmd_run)

    eval_p = sub.add_parser("eval", help="evaluate a finished run directory")
    eval_p.add_argument("--data", required=True, help="dataset root directory")
    eval_p.add_argument("--class", dest="class_name", required=True, help="object class name")
    eval_p.add_argument("--out", required=True, help="run output directory to evaluate into")
    eval_p.add_argument("--metric", default="f1max", help="comma list: f1max,auroc")
    eval_p.add_argument("--bins", type=int, default=2001, help="histogram bins for pixel metrics")
    eval_p.add_argument("--exact", action="store_true",
                        help="pool raw pixels instead of histograms (small data only)")
    eval_p.set_defaults(func=cmd_eval)

    cache_p = sub.add_parser("cache", help="precompute prompt embeddings")
    cache_p.add_argument("--class", dest="class_name", default=None,
                         help="comma list of class names to warm")
    cache_p.add_argument("--clear", action="store_true", help="empty the cache directory")
    add_backend_flags(cache_p)
    cache_p.set_defaults(func=cmd_cache)

    serve_p = sub.add_parser("serve", help="serve the mock backend over HTTP")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--seed", type=int, default=0)
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as err:
        print(f"transport error: {err}", file=sys.stderr)
        return EXIT_TRANSPORT
    except PermissionError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
