"""Pseudo-label curation: sample rejection and loss re-weighting."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import (
    AcceptedSample,
    CurationConfig,
    PseudoLabelRecord,
    RejectedSample,
    TrainingManifest,
    load_binary_mask,
)
from .metrics import foreground_ratio


@dataclass(frozen=True)
class ScaledConfidence:
    """A raw detector confidence and its min-max scaled value within one batch."""

    image_id: str
    raw: float
    scaled: float


def partition_by_confidence(
    records: Sequence[PseudoLabelRecord], t_c: float
) -> tuple[list[PseudoLabelRecord], list[PseudoLabelRecord]]:
    """Split records into (kept, rejected): kept iff confidence >= t_c.

    Input order is preserved within each set; a confidence exactly at the
    threshold is kept.
    """
    if not 0.0 <= t_c <= 1.0:
        raise ValueError(f"t_c must be in [0, 1], got {t_c}")
    kept = [r for r in records if r.confidence >= t_c]
    rejected = [r for r in records if r.confidence < t_c]
    return kept, rejected


def partition_by_fg_ratio(
    records: Sequence[PseudoLabelRecord],
    t_f: float,
    mask_root: str | Path | None = None,
) -> tuple[list[PseudoLabelRecord], list[PseudoLabelRecord], dict[str, str]]:
    """Split records into (kept, rejected): kept iff mask foreground ratio <= t_f.

    Records whose mask cannot be loaded are routed to the rejected set; the
    returned ``errors`` dict maps their image_id to the failure message.
    """
    if not 0.0 <= t_f <= 1.0:
        raise ValueError(f"t_f must be in [0, 1], got {t_f}")
    root = Path(mask_root) if mask_root is not None else None
    kept: list[PseudoLabelRecord] = []
    rejected: list[PseudoLabelRecord] = []
    errors: dict[str, str] = {}
    for record in records:
        path = Path(record.mask_ref)
        if root is not None and not path.is_absolute():
            path = root / path
        try:
            ratio = foreground_ratio(load_binary_mask(path))
        except (OSError, ValueError) as exc:
            errors[record.image_id] = str(exc)
            rejected.append(record)
            continue
        (kept if ratio <= t_f else rejected).append(record)
    return kept, rejected, errors


def minmax_scale(records: Sequence[PseudoLabelRecord]) -> list[ScaledConfidence]:
    """Min-max scale the batch confidences into [0, 1].

    A degenerate batch (all confidences equal, including a single record)
    scales to 1.0 everywhere so it is not silently zeroed out of training.
    """
    if not records:
        raise ValueError("cannot min-max scale an empty record list")
    raws = [r.confidence for r in records]
    lo, hi = min(raws), max(raws)
    if hi == lo:
        return [ScaledConfidence(r.image_id, r.confidence, 1.0) for r in records]
    span = hi - lo
    return [
        ScaledConfidence(r.image_id, r.confidence, (r.confidence - lo) / span)
        for r in records
    ]


def build_manifest(
    records: Sequence[PseudoLabelRecord],
    config: CurationConfig,
    mask_root: str | Path | None = None,
) -> TrainingManifest:
    """Apply the curation pipeline and emit a weighted training manifest.

    Filters compose in a fixed order: confidence threshold, then foreground
    ratio on the survivors, then (if ``reweight``) min-max scaling of the
    confidences into per-sample loss weights.  With ``scale_over='all'`` the
    scaling statistics come from the full input batch instead of the
    survivors.  Without ``reweight`` every accepted weight is 1.0.  An
    all-inactive config passes every record through.
    """
    survivors = list(records)
    rejected: list[RejectedSample] = []

    if config.t_c is not None:
        survivors, dropped = partition_by_confidence(survivors, config.t_c)
        rejected.extend(RejectedSample(r.image_id, "confidence") for r in dropped)

    if config.t_f is not None:
        survivors, dropped, errors = partition_by_fg_ratio(survivors, config.t_f, mask_root)
        rejected.extend(
            RejectedSample(r.image_id, "io_error" if r.image_id in errors else "fg_ratio")
            for r in dropped
        )

    if config.reweight and survivors:
        pool = list(records) if config.scale_over == "all" else survivors
        scaled = {s.image_id: s.scaled for s in minmax_scale(pool)}
        weights = [scaled[r.image_id] for r in survivors]
    else:
        weights = [1.0] * len(survivors)

    accepted = tuple(
        AcceptedSample(r.image_id, r.mask_ref, w) for r, w in zip(survivors, weights)
    )
    return TrainingManifest(accepted=accepted, rejected=tuple(rejected), config=config)
