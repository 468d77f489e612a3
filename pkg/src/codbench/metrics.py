"""Segmentation metric battery: MAE, S, E-phi, weighted F, FPR/TNR, ratios."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BinaryMask,
    atomic_write_text,
    binarize,
    load_binary_mask,
    load_probability_map,
    resize_to,
)
from .distance import nearest_foreground

#: Uniform guard for all epsilon-protected divisions.
EPS = 1e-8

_GAUSS_SIZE = 7
_GAUSS_SIGMA = 5.0
_BG_DECAY = math.log(0.5) / 5.0


def _as_values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _pred_gt(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p = _as_values(pred)
    g = _as_values(gt)
    if p.shape != g.shape:
        raise ValueError(f"dimension mismatch: pred {p.shape} vs gt {g.shape}")
    return p, g


# ---------------------------------------------------------------------------
# Pixel-error metrics
# ---------------------------------------------------------------------------

def mae(pred, gt) -> float:
    """Mean absolute per-pixel error between prediction map and mask."""
    p, g = _pred_gt(pred, gt)
    return float(np.abs(p - g).mean())


def foreground_ratio(mask) -> float:
    """Fraction of mask pixels labeled foreground."""
    g = _as_values(mask)
    return float(g.sum() / g.size)


# ---------------------------------------------------------------------------
# Structure measure
# ---------------------------------------------------------------------------

def _object_score(x: np.ndarray, eps: float) -> float:
    m = float(x.mean())
    sd = float(x.std())
    return 2.0 * m / (m * m + 1.0 + 2.0 * sd + eps)


def _centroid_cuts(g: np.ndarray) -> tuple[int, int]:
    # Foreground centroid, rounded half-up; the cut keeps the centroid pixel
    # in the top-left block (1-indexed convention of the reference measure).
    ys, xs = np.nonzero(g)
    cut_row = int(math.floor((ys + 1).mean() + 0.5))
    cut_col = int(math.floor((xs + 1).mean() + 0.5))
    return cut_row, cut_col


def _region_similarity(x: np.ndarray, y: np.ndarray, eps: float) -> float:
    n = x.size
    xm = float(x.mean())
    ym = float(y.mean())
    sx = float(((x - xm) ** 2).sum()) / n
    sy = float(((y - ym) ** 2).sum()) / n
    sxy = float(((x - xm) * (y - ym)).sum()) / n
    a = 4.0 * xm * ym * sxy
    b = (xm * xm + ym * ym) * (sx + sy)
    if a != 0.0:
        return a / (b + eps)
    return 1.0 if b == 0.0 else 0.0


def s_measure(pred, gt, eps: float = EPS) -> float:
    """Structure measure: equal mix of object-aware and region-aware similarity.

    Degenerate ground truths short-circuit: an empty mask scores
    1 - mean(pred), a full mask scores mean(pred).  The object term applies
    2*m / (m^2 + 1 + 2*sd + eps) to the prediction inside the foreground and
    to its complement inside the background (population standard deviation).
    The region term splits both images into four blocks at the foreground
    centroid and averages their structural similarity weighted by block area,
    clamped to [0, 1].
    """
    p, g = _pred_gt(pred, gt)
    mu = float(g.mean())
    if mu == 0.0:
        return 1.0 - float(p.mean())
    if mu == 1.0:
        return float(p.mean())

    fg = g == 1.0
    s_object = mu * _object_score(p[fg], eps) + (1.0 - mu) * _object_score(1.0 - p[~fg], eps)

    cut_row, cut_col = _centroid_cuts(g)
    total = g.size
    s_region = 0.0
    for rows in (slice(0, cut_row), slice(cut_row, None)):
        for cols in (slice(0, cut_col), slice(cut_col, None)):
            gq = g[rows, cols]
            if gq.size == 0:
                continue
            s_region += (gq.size / total) * _region_similarity(p[rows, cols], gq, eps)
    s_region = min(max(s_region, 0.0), 1.0)

    return 0.5 * s_object + 0.5 * s_region


# ---------------------------------------------------------------------------
# Enhanced-alignment measure
# ---------------------------------------------------------------------------

def e_measure(pred, gt, threshold: float | None = None, eps: float = EPS) -> float:
    """Enhanced-alignment measure over an adaptively binarized prediction.

    The prediction is binarized at min(1, 2 * mean(pred)) unless a fixed
    ``threshold`` is given (strict > comparison, as everywhere else).
    Empty/full ground truths use the degenerate enhanced matrices 1 - d and d.
    The final score divides by (W*H - 1 + eps) following the reference
    formulation and is clamped into [0, 1].
    """
    p, g = _pred_gt(pred, gt)
    t = min(1.0, 2.0 * float(p.mean())) if threshold is None else threshold
    d = (p > t).astype(np.float64)
    n_fg = float(g.sum())
    if n_fg == 0.0:
        enhanced = 1.0 - d
    elif n_fg == g.size:
        enhanced = d
    else:
        phi_g = g - g.mean()
        phi_d = d - d.mean()
        xi = 2.0 * phi_g * phi_d / (phi_g * phi_g + phi_d * phi_d + eps)
        enhanced = (xi + 1.0) ** 2 / 4.0
    score = float(enhanced.sum()) / (g.size - 1.0 + eps)
    return min(max(score, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Weighted F-measure
# ---------------------------------------------------------------------------

def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _blur_renormalized(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Zero-extension at the borders, renormalized by the in-bounds kernel mass.
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(img, ((ph, ph), (pw, pw)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw))
    num = np.einsum("ijkl,kl->ij", windows, kernel)
    ones = np.pad(np.ones_like(img), ((ph, ph), (pw, pw)))
    mass = np.einsum("ijkl,kl->ij", np.lib.stride_tricks.sliding_window_view(ones, (kh, kw)), kernel)
    return num / mass


def weighted_f_measure(pred, gt, eps: float = EPS) -> float:
    """Weighted F-measure with distance-decayed, dependency-aware errors.

    Background errors are substituted from the nearest foreground pixel,
    smoothed with a 7x7 Gaussian (sigma 5, border mass renormalized), combined
    as min(E, EA) on the foreground and EA on the background, and scaled by an
    importance map that decays with the exact Euclidean distance from the
    foreground.  beta = 1.  An empty ground truth yields 0.0 with a warning
    instead of failing the whole batch.
    """
    p, g = _pred_gt(pred, gt)
    fg = g == 1.0
    if not fg.any():
        warnings.warn("weighted_f_measure: empty ground truth, returning 0.0", stacklevel=2)
        return 0.0

    err = np.abs(p - g)
    dist, src_row, src_col = nearest_foreground(g.astype(np.uint8))
    err_t = err.copy()
    bg = ~fg
    err_t[bg] = err[src_row[bg], src_col[bg]]
    err_a = _blur_renormalized(err_t, _gaussian_kernel(_GAUSS_SIZE, _GAUSS_SIGMA))
    combined = np.where(fg, np.minimum(err, err_a), err_a)
    importance = np.where(fg, 1.0, 2.0 - 2.0 * np.exp(_BG_DECAY * dist))
    ew = combined * importance

    recall = 1.0 - float(ew[fg].mean())
    tp_w = float((1.0 - ew[fg]).sum())
    fp_w = float(ew[bg].sum())
    precision = tp_w / (tp_w + fp_w + eps)
    return 2.0 * precision * recall / (precision + recall + eps)


# ---------------------------------------------------------------------------
# Background-image measures
# ---------------------------------------------------------------------------

def _background_counts(pred_bin, gt) -> tuple[int, int]:
    pb, g = _pred_gt(pred_bin, gt)
    if g.sum() != 0.0:
        raise ValueError("FPR/TNR are only defined for object-free ground truth")
    fp = int(round(float(pb.sum())))
    return fp, pb.size


def fpr(pred_bin, gt) -> float:
    """False-positive rate FP / (TN + FP) on an object-free image."""
    fp, total = _background_counts(pred_bin, gt)
    return fp / total


def tnr(pred_bin, gt) -> float:
    """True-negative rate TN / (TN + FP); complements fpr on the same input."""
    fp, total = _background_counts(pred_bin, gt)
    return (total - fp) / total


# ---------------------------------------------------------------------------
# Scalar comparisons
# ---------------------------------------------------------------------------

def relative_improvement(new: float, base: float) -> float:
    """(new - base) / base; how much ``new`` improves over a baseline score."""
    if base <= 0.0:
        raise ValueError(f"baseline must be positive, got {base}")
    return (new - base) / base


def relative_gap(full: float, frugal: float) -> float:
    """(full - frugal) / full; how far a frugal score trails the full model."""
    if full <= 0.0:
        raise ValueError(f"full-model score must be positive, got {full}")
    return (full - frugal) / full


# ---------------------------------------------------------------------------
# Batch evaluation and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImageMetrics:
    image_id: str
    mae: float
    s_measure: float
    e_phi: float
    f_beta_w: float
    fg_ratio: float


@dataclass(frozen=True)
class BackgroundImageMetrics:
    image_id: str
    fpr: float
    tnr: float


METRIC_COLUMNS = ("mae", "s_measure", "e_phi", "f_beta_w", "fg_ratio")
BACKGROUND_COLUMNS = ("fpr", "tnr")


@dataclass(frozen=True)
class MetricReport:
    """Per-image metric rows (sorted by image_id) plus their arithmetic means."""

    per_image: tuple[ImageMetrics, ...]
    warnings: tuple[str, ...] = ()

    @property
    def aggregate(self) -> dict[str, float]:
        return {
            col: float(np.mean([getattr(row, col) for row in self.per_image]))
            for col in METRIC_COLUMNS
        }


@dataclass(frozen=True)
class BackgroundReport:
    per_image: tuple[BackgroundImageMetrics, ...]
    warnings: tuple[str, ...] = ()

    @property
    def aggregate(self) -> dict[str, float]:
        return {
            col: float(np.mean([getattr(row, col) for row in self.per_image]))
            for col in BACKGROUND_COLUMNS
        }


def evaluate_pair(
    image_id: str,
    pred_path: str | Path,
    gt_path: str | Path,
    binarize_threshold: float = 0.5,
    em_threshold: float | None = None,
    eps: float = EPS,
) -> ImageMetrics:
    """Evaluate one prediction/ground-truth file pair.

    The prediction is resized (bilinear) to the ground-truth resolution when
    shapes differ; fg_ratio reports the foreground share of the prediction
    binarized at ``binarize_threshold``.
    """
    pred = load_probability_map(pred_path)
    gt = load_binary_mask(gt_path)
    if pred.shape != gt.shape:
        pred = resize_to(pred, gt.width, gt.height)
    pred_bin = binarize(pred, binarize_threshold)
    return ImageMetrics(
        image_id=image_id,
        mae=mae(pred, gt),
        s_measure=s_measure(pred, gt, eps),
        e_phi=e_measure(pred, gt, em_threshold, eps),
        f_beta_w=weighted_f_measure(pred, gt, eps),
        fg_ratio=foreground_ratio(pred_bin),
    )


def evaluate_pairs(
    pairs: Sequence[tuple[str, Path, Path]],
    binarize_threshold: float = 0.5,
    em_threshold: float | None = None,
    eps: float = EPS,
    workers: int = 1,
    extra_warnings: Iterable[str] = (),
) -> MetricReport:
    """Evaluate many (image_id, pred_path, gt_path) triples, optionally in parallel.

    Rows are sorted by image_id before aggregation so the report is identical
    regardless of worker scheduling.
    """
    if not pairs:
        raise ValueError("no prediction/ground-truth pairs to evaluate")

    def one(item: tuple[str, Path, Path]) -> ImageMetrics:
        return evaluate_pair(item[0], item[1], item[2], binarize_threshold, em_threshold, eps)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, pairs))
    else:
        rows = [one(item) for item in pairs]
    rows.sort(key=lambda r: r.image_id)
    return MetricReport(per_image=tuple(rows), warnings=tuple(extra_warnings))


def evaluate_background(
    items: Sequence[tuple[str, Path]],
    binarize_threshold: float = 0.5,
    workers: int = 1,
    extra_warnings: Iterable[str] = (),
) -> BackgroundReport:
    """FPR/TNR for predictions on object-free images (implicit empty ground truth)."""
    if not items:
        raise ValueError("no predictions to evaluate")

    def one(item: tuple[str, Path]) -> BackgroundImageMetrics:
        image_id, path = item
        pred_bin = binarize(load_probability_map(path), binarize_threshold)
        empty = BinaryMask(np.zeros(pred_bin.shape, dtype=np.uint8))
        return BackgroundImageMetrics(image_id, fpr(pred_bin, empty), tnr(pred_bin, empty))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(item) for item in items]
    rows.sort(key=lambda r: r.image_id)
    return BackgroundReport(per_image=tuple(rows), warnings=tuple(extra_warnings))


# ---------------------------------------------------------------------------
# Serialization: JSON and CSV, floats printed with 6 decimals
# ---------------------------------------------------------------------------

def _rounded(values: dict[str, float]) -> dict[str, float]:
    return {k: round(v, 6) for k, v in values.items()}


def _report_dict(report: MetricReport | BackgroundReport, columns: tuple[str, ...], config_echo: dict) -> dict:
    return {
        "config": config_echo,
        "warnings": list(report.warnings),
        "per_image": [
            {"image_id": row.image_id, **_rounded({c: getattr(row, c) for c in columns})}
            for row in report.per_image
        ],
        "aggregate": _rounded(report.aggregate),
    }


def _config_echo_lines(config_echo: dict) -> list[str]:
    return [f"# {key}={config_echo[key]}" for key in sorted(config_echo)]


def _report_csv(report: MetricReport | BackgroundReport, columns: tuple[str, ...], config_echo: dict) -> str:
    lines = _config_echo_lines(config_echo)
    lines.append("image_id," + ",".join(columns))
    for row in report.per_image:
        lines.append(row.image_id + "," + ",".join(f"{getattr(row, c):.6f}" for c in columns))
    agg = report.aggregate
    lines.append("mean," + ",".join(f"{agg[c]:.6f}" for c in columns))
    return "\n".join(lines) + "\n"


def write_report_json(report: MetricReport, path: str | Path, config_echo: dict | None = None) -> Path:
    payload = _report_dict(report, METRIC_COLUMNS, config_echo or {})
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_report_csv(report: MetricReport, path: str | Path, config_echo: dict | None = None) -> Path:
    return atomic_write_text(path, _report_csv(report, METRIC_COLUMNS, config_echo or {}))


def write_background_json(report: BackgroundReport, path: str | Path, config_echo: dict | None = None) -> Path:
    payload = _report_dict(report, BACKGROUND_COLUMNS, config_echo or {})
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_background_csv(report: BackgroundReport, path: str | Path, config_echo: dict | None = None) -> Path:
    return atomic_write_text(path, _report_csv(report, BACKGROUND_COLUMNS, config_echo or {}))
