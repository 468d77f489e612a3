"""Domain types for masks, maps, and manifests, plus bit-exact file I/O."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

#: PNG byte value written for foreground pixels; background is 0.
FOREGROUND_BYTE = 255

#: Pillow modes accepted by the loaders (all 8-bit; color collapses to luma).
_LOADABLE_MODES = {"L", "LA", "P", "RGB", "RGBA"}

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class DetectionsError(ValueError):
    """Raised when a detections file violates the expected schema."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel soft prediction in [0, 1], stored row-major as (height, width)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"probability map must be 2-D and non-empty, got shape {arr.shape}")
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("probability map values must be finite and within [0, 1]")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel {0, 1} label mask, stored row-major as (height, width)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"binary mask must be 2-D and non-empty, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("binary mask values must be exactly 0 or 1")
        object.__setattr__(self, "values", _freeze(arr.astype(np.uint8)))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def as_map(self) -> ProbabilityMap:
        """Promote to a ProbabilityMap with values in {0.0, 1.0}."""
        return ProbabilityMap(self.values.astype(np.float64))


@dataclass(frozen=True)
class PseudoLabelRecord:
    """One machine-generated label: mask reference plus detector confidence."""

    image_id: str
    mask_ref: str
    confidence: float
    source: str = "gsam"
    bbox: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(
                f"confidence for {self.image_id!r} must be in [0, 1], got {self.confidence}"
            )
        if self.source not in ("gsam", "cod-model", "other"):
            raise ValueError(f"unknown pseudo-label source {self.source!r}")


@dataclass(frozen=True)
class CurationConfig:
    """Thresholds and re-weighting switches for pseudo-label curation.

    ``t_c`` keeps records with confidence >= t_c, ``t_f`` keeps records whose
    mask foreground ratio is <= t_f, ``reweight`` min-max scales the surviving
    confidences into per-sample loss weights.  ``scale_over`` selects whether
    that scaling runs over the survivors only (default) or over the whole
    input batch.
    """

    t_c: float | None = None
    t_f: float | None = None
    reweight: bool = False
    scale_over: str = "survivors"

    def __post_init__(self) -> None:
        for name, value in (("t_c", self.t_c), ("t_f", self.t_f)):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.scale_over not in ("survivors", "all"):
            raise ValueError(f"scale_over must be 'survivors' or 'all', got {self.scale_over!r}")

    @property
    def is_passthrough(self) -> bool:
        return self.t_c is None and self.t_f is None and not self.reweight

    def to_dict(self) -> dict:
        return {
            "t_c": self.t_c,
            "t_f": self.t_f,
            "reweight": self.reweight,
            "scale_over": self.scale_over,
        }


@dataclass(frozen=True)
class AcceptedSample:
    image_id: str
    mask_ref: str
    weight: float


@dataclass(frozen=True)
class RejectedSample:
    image_id: str
    reason: str  # one of "confidence", "fg_ratio", "io_error"


@dataclass(frozen=True)
class TrainingManifest:
    """Curated partition S1 (accepted, weighted) / S2 (rejected, with reasons)."""

    accepted: tuple[AcceptedSample, ...]
    rejected: tuple[RejectedSample, ...]
    config: CurationConfig

    def __post_init__(self) -> None:
        ids = [s.image_id for s in self.accepted] + [s.image_id for s in self.rejected]
        if len(ids) != len(set(ids)):
            raise ValueError("accepted and rejected sets must be disjoint per image_id")
        for s in self.accepted:
            if not 0.0 <= s.weight <= 1.0:
                raise ValueError(f"weight for {s.image_id!r} out of [0, 1]: {s.weight}")

    @property
    def accepted_ids(self) -> list[str]:
        return [s.image_id for s in self.accepted]

    @property
    def rejected_ids(self) -> list[str]:
        return [s.image_id for s in self.rejected]

    def to_dict(self) -> dict:
        return {
            "accepted": [
                {"image_id": s.image_id, "mask": s.mask_ref, "weight": round(s.weight, 6)}
                for s in self.accepted
            ],
            "rejected": [
                {"image_id": s.image_id, "reason": s.reason} for s in self.rejected
            ],
            "config": self.config.to_dict(),
        }


# ---------------------------------------------------------------------------
# Atomic file emission (temp file + rename, same directory)
# ---------------------------------------------------------------------------

def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# PNG ingestion / emission
# ---------------------------------------------------------------------------

def _load_grayscale_bytes(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image file not found: {path}")
    with Image.open(path) as img:
        if img.mode not in _LOADABLE_MODES:
            raise ValueError(
                f"unsupported image mode {img.mode!r} in {path} (expected 8-bit; "
                f"one of {sorted(_LOADABLE_MODES)})"
            )
        gray = img if img.mode == "L" else img.convert("L")
        return np.asarray(gray, dtype=np.uint8)


def load_probability_map(path: str | Path) -> ProbabilityMap:
    """Load an 8-bit grayscale (or luma-collapsed color) image as byte/255 values."""
    raw = _load_grayscale_bytes(path)
    return ProbabilityMap(raw.astype(np.float64) / 255.0)


def load_binary_mask(path: str | Path, threshold: float = 0.5) -> BinaryMask:
    """Load a mask image, binarizing at ``threshold`` (strictly greater is foreground).

    Ground-truth masks may carry anti-aliased edge bytes; thresholding at 0.5
    maps bytes >= 128 to foreground.
    """
    return binarize(load_probability_map(path), threshold)


def save_probability_map(pmap: ProbabilityMap, path: str | Path) -> Path:
    """Write as 8-bit grayscale PNG, rounding each value to the nearest byte."""
    raw = np.rint(pmap.values * 255.0).astype(np.uint8)
    return _save_gray_png(raw, path)


def save_binary_mask(mask: BinaryMask, path: str | Path) -> Path:
    """Write as 8-bit grayscale PNG with foreground 255 and background 0."""
    raw = (mask.values * FOREGROUND_BYTE).astype(np.uint8)
    return _save_gray_png(raw, path)


def _save_gray_png(raw: np.ndarray, path: str | Path) -> Path:
    import io

    buf = io.BytesIO()
    Image.fromarray(raw, mode="L").save(buf, format="PNG")
    return atomic_write_bytes(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Map/mask transforms
# ---------------------------------------------------------------------------

def binarize(pmap: ProbabilityMap, threshold: float) -> BinaryMask:
    """Threshold a map into a mask: pixel = 1 iff value > threshold (strict).

    The strict inequality sends an all-0.5 degenerate map to background,
    which is the safe default when most scenes contain no object.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return BinaryMask((pmap.values > threshold).astype(np.uint8))


def _linear_sample(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Pixel-center mapping (the common half-pixel-offset convention), edges clamped.
    x = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
    x = np.clip(x, 0.0, n_src - 1.0)
    lo = np.floor(x).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, x - lo


def resize_to(pmap: ProbabilityMap, width: int, height: int) -> ProbabilityMap:
    """Bilinear resize; output values are clamped back into [0, 1]."""
    if width < 1 or height < 1:
        raise ValueError(f"target size must be >= 1, got {width}x{height}")
    if (width, height) == (pmap.width, pmap.height):
        return pmap
    src = pmap.values
    r_lo, r_hi, r_w = _linear_sample(pmap.height, height)
    c_lo, c_hi, c_w = _linear_sample(pmap.width, width)
    rows = src[r_lo, :] * (1.0 - r_w)[:, None] + src[r_hi, :] * r_w[:, None]
    out = rows[:, c_lo] * (1.0 - c_w)[None, :] + rows[:, c_hi] * c_w[None, :]
    return ProbabilityMap(np.clip(out, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Detections and manifest files
# ---------------------------------------------------------------------------

def load_detections(path: str | Path) -> list[PseudoLabelRecord]:
    """Read a detections JSON array into pseudo-label records.

    Schema per entry: {"image_id": str, "confidence": number,
    "bbox": [x0, y0, x1, y1] optional, "mask": str optional,
    "source": str optional}.  Duplicate image_ids are rejected.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"detections file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DetectionsError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(entries, list):
        raise DetectionsError(f"{path}: top-level value must be a JSON array")

    records: list[PseudoLabelRecord] = []
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise DetectionsError(f"{path}: entry {i} is not an object")
        try:
            image_id = entry["image_id"]
            confidence = entry["confidence"]
        except KeyError as exc:
            raise DetectionsError(f"{path}: entry {i} is missing key {exc}") from None
        if not isinstance(image_id, str) or not image_id:
            raise DetectionsError(f"{path}: entry {i} has invalid image_id {image_id!r}")
        if image_id in seen:
            raise DetectionsError(f"{path}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        if not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
            raise DetectionsError(
                f"{path}: entry {image_id!r} has confidence {confidence!r} outside [0, 1]"
            )
        bbox = entry.get("bbox")
        if bbox is not None:
            if not (isinstance(bbox, list) and len(bbox) == 4):
                raise DetectionsError(f"{path}: entry {image_id!r} has malformed bbox {bbox!r}")
            bbox = tuple(float(v) for v in bbox)
        records.append(
            PseudoLabelRecord(
                image_id=image_id,
                mask_ref=entry.get("mask", f"{image_id}.png"),
                confidence=float(confidence),
                source=entry.get("source", "gsam"),
                bbox=bbox,
            )
        )
    return records


def save_manifest(manifest: TrainingManifest, path: str | Path) -> Path:
    text = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
    return atomic_write_text(path, text)


def load_manifest(path: str | Path) -> TrainingManifest:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = data.get("config", {})
    return TrainingManifest(
        accepted=tuple(
            AcceptedSample(e["image_id"], e["mask"], float(e["weight"]))
            for e in data["accepted"]
        ),
        rejected=tuple(
            RejectedSample(e["image_id"], e["reason"]) for e in data["rejected"]
        ),
        config=CurationConfig(
            t_c=cfg.get("t_c"),
            t_f=cfg.get("t_f"),
            reweight=bool(cfg.get("reweight", False)),
            scale_over=cfg.get("scale_over", "survivors"),
        ),
    )


# ---------------------------------------------------------------------------
# Directory pairing
# ---------------------------------------------------------------------------

def list_image_stems(directory: str | Path) -> dict[str, Path]:
    """Map filename stems to paths for every PNG/JPEG directly in ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"not a directory: {directory}")
    stems: dict[str, Path] = {}
    for entry in sorted(directory.iterdir()):
        if entry.is_file() and entry.suffix.lower() in _IMAGE_SUFFIXES:
            stems[entry.stem] = entry
    return stems


def pair_stems(
    pred_dir: str | Path, gt_dir: str | Path
) -> tuple[list[tuple[str, Path, Path]], list[str], list[str]]:
    """Pair prediction and ground-truth files by filename stem.

    Returns (pairs sorted by stem, stems only in pred_dir, stems only in gt_dir).
    """
    preds = list_image_stems(pred_dir)
    gts = list_image_stems(gt_dir)
    shared = sorted(preds.keys() & gts.keys())
    pairs = [(stem, preds[stem], gts[stem]) for stem in shared]
    only_pred = sorted(preds.keys() - gts.keys())
    only_gt = sorted(gts.keys() - preds.keys())
    return pairs, only_pred, only_gt
