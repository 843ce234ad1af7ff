"""Dataset loading, F1-max / AUROC metrics and per-class report tables.

F1-max (the F1 score at the dataset-optimal threshold) is the primary
metric at both sample and pixel level; it is far less sensitive to class
imbalance than AUROC, which matters because defects are usually tiny
relative to the image. AUROC is kept as a secondary metric.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image
from scipy.stats import rankdata

from .core import LABEL_ANOMALOUS, LABEL_NORMAL, BinaryMask, ImageSample, ScoreMap

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}

# Class column order used by the VisA benchmark tables.
VISA_CLASS_ORDER = (
    "pcb1",
    "pcb2",
    "pcb3",
    "pcb4",
    "capsules",
    "candle",
    "macaroni1",
    "macaroni2",
    "cashew",
    "chewinggum",
    "fryum",
    "pipe_fryum",
)

# Published VisA F1-max reference rows (percent). "vand" is the published
# result of the pipeline implemented here; the stored means are the
# published ones (computed before per-class rounding, so they can differ
# from the mean of the rounded cells in the last decimal).
REFERENCE_RESULTS = {
    "sample_f1max": {
        "winclip": {
            "pcb1": 71.0, "pcb2": 67.1, "pcb3": 71.0, "pcb4": 74.9,
            "capsules": 83.9, "candle": 89.4, "macaroni1": 74.2,
            "macaroni2": 69.8, "cashew": 88.4, "chewinggum": 94.8,
            "fryum": 82.7, "pipe_fryum": 80.7, "mean": 79.0,
        },
        "april_gan": {
            "pcb1": 66.9, "pcb2": 70.1, "pcb3": 66.7, "pcb4": 87.3,
            "capsules": 77.6, "candle": 77.8, "macaroni1": 71.1,
            "macaroni2": 69.1, "cashew": 84.8, "chewinggum": 93.7,
            "fryum": 91.7, "pipe_fryum": 87.7, "mean": 78.7,
        },
        "vand": {
            "pcb1": 74.3, "pcb2": 67.1, "pcb3": 70.2, "pcb4": 87.3,
            "capsules": 84.9, "candle": 82.1, "macaroni1": 83.3,
            "macaroni2": 76.9, "cashew": 82.3, "chewinggum": 94.4,
            "fryum": 84.8, "pipe_fryum": 90.0, "mean": 81.5,
        },
    },
    "pixel_f1max": {
        "winclip": {
            "pcb1": 2.4, "pcb2": 4.7, "pcb3": 10.3, "pcb4": 32.0,
            "capsules": 9.2, "candle": 22.5, "macaroni1": 7.0,
            "macaroni2": 1.0, "cashew": 13.2, "chewinggum": 41.1,
            "fryum": 22.1, "pipe_fryum": 12.3, "mean": 14.8,
        },
        "april_gan": {
            "pcb1": 12.5, "pcb2": 23.4, "pcb3": 21.7, "pcb4": 31.3,
            "capsules": 48.5, "candle": 39.4, "macaroni1": 35.5,
            "macaroni2": 13.7, "cashew": 22.9, "chewinggum": 78.5,
            "fryum": 29.7, "pipe_fryum": 30.4, "mean": 32.3,
        },
        "vand": {
            "pcb1": 29.5, "pcb2": 11.0, "pcb3": 4.7, "pcb4": 21.7,
            "capsules": 31.9, "candle": 20.2, "macaroni1": 24.6,
            "macaroni2": 7.2, "cashew": 24.5, "chewinggum": 63.4,
            "fryum": 31.3, "pipe_fryum": 19.6, "mean": 24.2,
        },
    },
}


@dataclass
class ClassReport:
    """Per-class evaluation summary (one table cell group)."""

    class_name: str
    sample_f1max: float
    sample_threshold: float
    pixel_f1max: Optional[float]
    pixel_threshold: Optional[float]
    n_samples: int
    sample_auroc: Optional[float] = None
    pixel_auroc: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "class_name": self.class_name,
            "sample_f1max": self.sample_f1max,
            "sample_threshold": self.sample_threshold,
            "pixel_f1max": self.pixel_f1max,
            "pixel_threshold": self.pixel_threshold,
            "n_samples": self.n_samples,
            "sample_auroc": self.sample_auroc,
            "pixel_auroc": self.pixel_auroc,
        }


def f1_max(scores: Sequence[float], labels: Sequence[int]) -> tuple[float, float]:
    """Maximum F1 over all thresholds, with the threshold achieving it.

    Predictions are positive where ``score >= threshold``; the candidate
    set is the distinct scores plus +inf, and F1 ties resolve toward the
    highest threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size == 0:
        raise ValueError(
            f"scores and labels must be equal-length 1-D sequences, got "
            f"{scores.shape} and {labels.shape}"
        )
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("undefined metric: no positive labels")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    cum_tp = np.cumsum(labels[order])
    # Last index of each equal-score group, scanning from the highest score.
    is_group_end = np.append(sorted_scores[:-1] != sorted_scores[1:], True)
    idx = np.flatnonzero(is_group_end)
    tp = cum_tp[idx]
    n_pred = idx + 1.0
    # 2tp / (2tp + fp + fn) simplifies to 2tp / (n_pred + n_pos).
    f1 = 2.0 * tp / (n_pred + n_pos)
    best = int(np.argmax(f1))  # first max = highest threshold on ties
    if f1[best] <= 0.0:
        return 0.0, math.inf
    return float(f1[best]), float(sorted_scores[idx[best]])


def f1_at_threshold(scores: Sequence[float], labels: Sequence[int], threshold: float) -> float:
    """F1 of the fixed decision rule ``score >= threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via the rank-sum formula (ties averaged)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


class PixelMetricAccumulator:
    """Streaming pooled-pixel confusion counts over uniform score bins.

    Scores are bucketed on the ``bins + 1`` edges ``j / bins``; candidate
    thresholds are exactly those edges, so the result is exact whenever the
    scores are quantized to the edges and otherwise off by at most one bin
    width in threshold.
    """

    def __init__(self, bins: int = 2001):
        if bins < 2:
            raise ValueError("bins must be >= 2")
        self.bins = bins
        self.edges = np.linspace(0.0, 1.0, bins + 1)
        self.pos_counts = np.zeros(bins + 1, dtype=np.int64)
        self.neg_counts = np.zeros(bins + 1, dtype=np.int64)

    def add(self, score_map: ScoreMap, gt_mask: BinaryMask) -> None:
        if score_map.shape != gt_mask.shape:
            raise ValueError(
                f"score map shape {score_map.shape} does not match ground "
                f"truth shape {gt_mask.shape}"
            )
        values = score_map.ravel()
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("score map values must lie in [0, 1]")
        buckets = np.searchsorted(self.edges, values, side="right") - 1
        gt = np.asarray(gt_mask, dtype=bool).ravel()
        self.pos_counts += np.bincount(buckets[gt], minlength=self.bins + 1)
        self.neg_counts += np.bincount(buckets[~gt], minlength=self.bins + 1)

    def _suffix_counts(self) -> tuple[np.ndarray, np.ndarray]:
        tp = np.cumsum(self.pos_counts[::-1])[::-1]
        fp = np.cumsum(self.neg_counts[::-1])[::-1]
        return tp, fp

    def f1_max(self) -> tuple[float, float]:
        n_pos = int(self.pos_counts.sum())
        if n_pos == 0:
            raise ValueError("undefined metric: no positive pixels")
        tp, fp = self._suffix_counts()
        n_pred = tp + fp
        f1 = 2.0 * tp / (n_pred + n_pos)  # denominator >= n_pos >= 1
        # Scan thresholds descending so ties resolve toward the highest one.
        best = len(f1) - 1 - int(np.argmax(f1[::-1]))
        if f1[best] <= 0.0:
            return 0.0, math.inf
        return float(f1[best]), float(self.edges[best])

    def auroc(self) -> float:
        n_pos = int(self.pos_counts.sum())
        n_neg = int(self.neg_counts.sum())
        if n_pos == 0 or n_neg == 0:
            raise ValueError("AUROC needs both positive and negative pixels")
        tp, fp = self._suffix_counts()
        tpr = np.concatenate(([0.0], tp[::-1] / n_pos))
        fpr = np.concatenate(([0.0], fp[::-1] / n_neg))
        return float(np.trapezoid(tpr, fpr))


def pixel_f1_max(
    results: Sequence["object"],
    gt_masks: Sequence[Optional[BinaryMask]],
    bins: int = 2001,
    exact: bool = False,
) -> tuple[float, float]:
    """F1-max over the pooled pixels of all given anomaly maps.

    ``results`` may be SampleResult objects or bare score maps. ``exact``
    bypasses the histogram and pools raw pixel values (memory-hostile on
    real datasets; intended for small data and verification).
    """
    if len(results) != len(gt_masks):
        raise ValueError("results and gt_masks must have equal length")
    maps = []
    for result, mask in zip(results, gt_masks):
        anomaly_map = getattr(result, "anomaly_map", result)
        sample_id = getattr(result, "sample_id", "<map>")
        if mask is None:
            raise ValueError(f"sample {sample_id} has no ground-truth mask")
        maps.append((anomaly_map, mask))
    if exact:
        scores = np.concatenate([m.ravel() for m, _ in maps])
        labels = np.concatenate([g.ravel().astype(np.int64) for _, g in maps])
        return f1_max(scores, labels)
    acc = PixelMetricAccumulator(bins=bins)
    for anomaly_map, mask in maps:
        acc.add(anomaly_map, mask)
    return acc.f1_max()


def _load_pixels(path: Path) -> np.ndarray:
    img = Image.open(path).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def _load_mask(path: Path) -> BinaryMask:
    img = Image.open(path).convert("L")
    return np.asarray(img) > 0


def load_dataset(root: str | Path, class_name: str) -> list[ImageSample]:
    """Load one class of a VisA-style test layout.

    Expects ``<root>/<class>/test/{good,bad}/*.png|jpg`` with ground-truth
    masks in ``<root>/<class>/ground_truth/bad/*.png`` paired by filename
    stem. Anomalous images without a mask are kept for sample-level metrics
    with a warning; they are simply excluded from pixel-level pooling.
    """
    class_dir = Path(root) / class_name
    test_dir = class_dir / "test"
    if not test_dir.is_dir():
        raise FileNotFoundError(f"no test directory at {test_dir}")
    mask_dir = class_dir / "ground_truth" / "bad"

    samples = []
    for split, label in (("good", LABEL_NORMAL), ("bad", LABEL_ANOMALOUS)):
        split_dir = test_dir / split
        if not split_dir.is_dir():
            continue
        for path in sorted(split_dir.iterdir(), key=lambda p: p.name):
            if path.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            pixels = _load_pixels(path)
            gt_mask = None
            if label == LABEL_ANOMALOUS:
                candidates = sorted(mask_dir.glob(path.stem + ".*")) if mask_dir.is_dir() else []
                mask_paths = [c for c in candidates if c.suffix.lower() in IMAGE_EXTENSIONS]
                if mask_paths:
                    gt_mask = _load_mask(mask_paths[0])
                    if gt_mask.shape != pixels.shape[:2]:
                        raise ValueError(
                            f"mask {mask_paths[0]} has shape {gt_mask.shape} but "
                            f"image {path} has shape {pixels.shape[:2]}"
                        )
                else:
                    logger.warning(
                        "anomalous sample %s has no ground-truth mask; it will be "
                        "excluded from pixel metrics",
                        path,
                    )
            samples.append(
                ImageSample(
                    id=f"{split}_{path.stem}",
                    pixels=pixels,
                    class_name=class_name,
                    label=label,
                    gt_mask=gt_mask,
                )
            )
    if not samples:
        logger.warning("no test images found under %s", test_dir)
    return sorted(samples, key=lambda s: s.id)


def evaluate_class(
    results: Sequence["object"],
    samples: Sequence[ImageSample],
    bins: int = 2001,
    metrics: Sequence[str] = ("f1max",),
    exact_pixel: bool = False,
) -> ClassReport:
    """Combine sample-level and pixel-level metrics into one report.

    ``results`` must expose ``sample_id``, ``sample_score`` and
    ``anomaly_map``; they are matched to ``samples`` by id. Normal samples
    contribute all-negative pixels; anomalous samples without a mask are
    skipped at pixel level.
    """
    by_id = {s.id: s for s in samples}
    class_name = samples[0].class_name if samples else "unknown"

    scores, labels = [], []
    acc = PixelMetricAccumulator(bins=bins)
    exact_maps: list[tuple[ScoreMap, BinaryMask]] = []
    have_pixels = False
    for result in results:
        sample = by_id.get(result.sample_id)
        if sample is None:
            raise ValueError(f"result {result.sample_id} matches no loaded sample")
        if sample.label is None:
            logger.warning("sample %s has unknown label; skipped in metrics", sample.id)
            continue
        scores.append(result.sample_score)
        labels.append(sample.label)
        if sample.gt_mask is not None:
            gt = sample.gt_mask
        elif sample.label == LABEL_NORMAL:
            gt = np.zeros(sample.shape, dtype=bool)
        else:
            continue  # anomalous without mask: sample metrics only
        have_pixels = True
        if exact_pixel:
            exact_maps.append((result.anomaly_map, gt))
        else:
            acc.add(result.anomaly_map, gt)

    sample_f1, sample_thr = f1_max(scores, labels)
    pixel_f1 = pixel_thr = None
    pixel_roc = None
    if have_pixels:
        if exact_pixel:
            pixel_f1, pixel_thr = pixel_f1_max(
                [m for m, _ in exact_maps], [g for _, g in exact_maps], exact=True
            )
        else:
            pixel_f1, pixel_thr = acc.f1_max()
    report = ClassReport(
        class_name=class_name,
        sample_f1max=sample_f1,
        sample_threshold=sample_thr,
        pixel_f1max=pixel_f1,
        pixel_threshold=pixel_thr,
        n_samples=len(scores),
    )
    if "auroc" in metrics:
        report.sample_auroc = auroc(scores, labels)
        if have_pixels and not exact_pixel:
            report.pixel_auroc = acc.auroc()
        elif exact_maps:
            pooled = np.concatenate([m.ravel() for m, _ in exact_maps])
            pooled_gt = np.concatenate([g.ravel().astype(np.int64) for _, g in exact_maps])
            report.pixel_auroc = auroc(pooled, pooled_gt)
    return report


def _ordered_class_names(reports: Sequence[ClassReport]) -> list[str]:
    names = [r.class_name for r in reports]
    known = [c for c in VISA_CLASS_ORDER if c in names]
    extra = sorted(n for n in names if n not in VISA_CLASS_ORDER)
    return known + extra


def _metric_rows(reports: Sequence[ClassReport]) -> list[tuple[str, dict]]:
    rows = []
    for attr in ("sample_f1max", "pixel_f1max", "sample_auroc", "pixel_auroc"):
        values = {r.class_name: getattr(r, attr) for r in reports}
        if all(v is None for v in values.values()):
            continue
        rows.append((attr, values))
    return rows


def summarize_reports(reports: Sequence[ClassReport]) -> dict:
    """Machine-readable summary: per-class reports plus unweighted means."""
    order = _ordered_class_names(reports)
    by_name = {r.class_name: r for r in reports}
    means = {}
    for attr, values in _metric_rows(reports):
        present = [values[c] for c in order if values[c] is not None]
        means[attr] = float(np.mean(present)) if present else None
    return {
        "classes": [by_name[c].to_dict() for c in order],
        "mean": means,
    }


def format_report_table(reports: Sequence[ClassReport]) -> str:
    """Aligned text table: metrics as rows, classes as columns, Mean last.

    Values are percentages to match the benchmark's table convention.
    """
    order = _ordered_class_names(reports)
    rows = _metric_rows(reports)
    header = ["metric (%)"] + order + ["Mean"]
    lines = [header]
    for attr, values in rows:
        present = [values[c] for c in order if values[c] is not None]
        mean = float(np.mean(present)) if present else None
        cells = [attr]
        for c in order:
            v = values[c]
            cells.append("n/a" if v is None else f"{100 * v:.1f}")
        cells.append("n/a" if mean is None else f"{100 * mean:.1f}")
        lines.append(cells)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    out = []
    for row in lines:
        out.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return "\n".join(out) + "\n"


def report_table_csv(reports: Sequence[ClassReport]) -> str:
    """CSV form of the report: one row per class plus a mean row."""
    order = _ordered_class_names(reports)
    by_name = {r.class_name: r for r in reports}
    rows = _metric_rows(reports)
    attrs = [attr for attr, _ in rows]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class"] + attrs + ["n_samples"])

    def fmt(v):
        return "" if v is None else repr(float(v))

    for c in order:
        r = by_name[c]
        writer.writerow([c] + [fmt(getattr(r, attr)) for attr in attrs] + [r.n_samples])
    means = summarize_reports(reports)["mean"]
    writer.writerow(["mean"] + [fmt(means.get(attr)) for attr in attrs] + [""])
    return buf.getvalue()


def render_report_figure(reports: Sequence[ClassReport], path: str | Path) -> None:
    """Bar chart of per-class F1-max values saved next to the tables."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    order = _ordered_class_names(reports)
    by_name = {r.class_name: r for r in reports}
    sample_vals = [100 * by_name[c].sample_f1max for c in order]
    pixel_vals = [
        0.0 if by_name[c].pixel_f1max is None else 100 * by_name[c].pixel_f1max
        for c in order
    ]
    x = np.arange(len(order))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(order) + 2), 4.0))
    ax.bar(x - width / 2, sample_vals, width, label="sample F1-max")
    ax.bar(x + width / 2, pixel_vals, width, label="pixel F1-max")
    ax.axhline(float(np.mean(sample_vals)), color="C0", ls="--", lw=1, alpha=0.6)
    if any(by_name[c].pixel_f1max is not None for c in order):
        ax.axhline(float(np.mean(pixel_vals)), color="C1", ls="--", lw=1, alpha=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(order, rotation=30, ha="right")
    ax.set_ylabel("F1-max (%)")
    ax.set_ylim(0, 100)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
