#!/usr/bin/env python3
"""Curate a batch of noisy pseudo-labels into a weighted training manifest.

A detector produced masks of mixed quality: some confidently correct, some
low-confidence misses, and one failure case that painted most of the image
foreground.  The demo shows the three curation levers separately and then
composed: confidence thresholding, foreground-ratio thresholding, and
min-max loss re-weighting.

Run: python demos/demo_curation.py
"""

import tempfile
from pathlib import Path

import numpy as np

from codbench import BinaryMask, CurationConfig, PseudoLabelRecord, build_manifest
from codbench.core import save_binary_mask
from codbench.curation import minmax_scale, partition_by_confidence, partition_by_fg_ratio


def make_mask(ratio: float, side: int = 32) -> BinaryMask:
    flat = np.zeros(side * side, dtype=np.uint8)
    flat[: int(round(ratio * side * side))] = 1
    return BinaryMask(flat.reshape(side, side))


def main():
    workdir = Path(tempfile.mkdtemp(prefix="codbench_curation_"))
    batch = [
        # (confidence, mask foreground ratio)
        ("frame_a", 0.81, 0.06),   # confident, tight mask
        ("frame_b", 0.15, 0.05),   # detector barely saw anything
        ("frame_c", 0.44, 0.09),
        ("frame_d", 0.92, 0.04),
        ("frame_e", 0.37, 0.83),   # confident but segmented most of the scene
        ("frame_f", 0.30, 0.11),   # exactly at the confidence threshold
    ]
    records = []
    for image_id, conf, ratio in batch:
        mask_path = workdir / f"{image_id}.png"
        save_binary_mask(make_mask(ratio), mask_path)
        records.append(PseudoLabelRecord(image_id, str(mask_path), conf))

    print("input batch:")
    for (image_id, conf, ratio) in batch:
        print(f"  {image_id}: confidence={conf:.2f} fg_ratio={ratio:.2f}")

    kept, dropped = partition_by_confidence(records, t_c=0.3)
    print(f"\nconfidence >= 0.3 keeps {[r.image_id for r in kept]}")
    print(f"                 drops {[r.image_id for r in dropped]}")

    kept_f, dropped_f, _ = partition_by_fg_ratio(records, t_f=0.3)
    print(f"fg ratio <= 0.3 keeps {[r.image_id for r in kept_f]}")
    print(f"                drops {[r.image_id for r in dropped_f]} (oversized masks)")

    scaled = minmax_scale(records)
    print("\nmin-max scaled confidences (weight 0 = least confident, 1 = most):")
    for s in scaled:
        print(f"  {s.image_id}: raw={s.raw:.2f} -> weight={s.scaled:.3f}")

    config = CurationConfig(t_c=0.3, t_f=0.3, reweight=True)
    manifest = build_manifest(records, config)
    print("\ncomposed manifest (confidence filter, then ratio filter, then re-weighting):")
    for sample in manifest.accepted:
        print(f"  accepted {sample.image_id} weight={sample.weight:.3f}")
    for rejected in manifest.rejected:
        print(f"  rejected {rejected.image_id} ({rejected.reason})")
    print("\nA trainer consuming this manifest multiplies each sample's loss by its weight,")
    print("so the least confident surviving pseudo-label contributes nothing.")


if __name__ == "__main__":
    main()
