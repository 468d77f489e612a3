#!/usr/bin/env python3
"""Walk through the segmentation metric battery on synthetic predictions.

Builds one ground-truth mask and four predictions of decreasing quality
(perfect, lightly noisy, blurred+shifted, inverted), then prints MAE,
S-measure, E-measure, and the weighted F-measure for each, plus the
degenerate object-free cases where only FPR/TNR apply.

Run: python demos/demo_metrics.py
"""

import numpy as np

from codbench import binarize, e_measure, foreground_ratio, fpr, mae, s_measure, tnr, weighted_f_measure
from codbench.core import ProbabilityMap


def blob(h, w, cy, cx, ry, rx):
    yy, xx = np.mgrid[0:h, 0:w]
    return ((((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2) <= 1).astype(np.uint8)


def box_blur(img, passes=3):
    out = img.astype(float)
    for _ in range(passes):
        acc = out.copy()
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            acc += np.roll(out, (dy, dx), axis=(0, 1))
        out = acc / 5
    return out


def main():
    rng = np.random.default_rng(0)
    gt = blob(64, 64, 32, 30, 12, 9)
    print(f"ground truth: 64x64, foreground ratio {foreground_ratio(gt):.3f}\n")

    candidates = {
        "perfect": gt.astype(float),
        "noisy": np.clip(gt + rng.normal(0, 0.1, gt.shape), 0, 1),
        "blurred+shifted": np.clip(box_blur(np.roll(gt, (4, 3), axis=(0, 1))), 0, 1),
        "inverted": 1.0 - gt.astype(float),
    }
    header = f"{'prediction':<16} {'mae':>8} {'s':>8} {'e_phi':>8} {'f_beta_w':>9}"
    print(header)
    print("-" * len(header))
    for name, pred in candidates.items():
        print(
            f"{name:<16} {mae(pred, gt):>8.4f} {s_measure(pred, gt):>8.4f} "
            f"{e_measure(pred, gt):>8.4f} {weighted_f_measure(pred, gt):>9.4f}"
        )

    print("\nObject-free images: only false-positive/true-negative rates apply.")
    empty = np.zeros((64, 64), np.uint8)
    for name, pred in (("quiet model", rng.random((64, 64)) * 0.3),
                       ("trigger-happy model", rng.random((64, 64)) * 0.5 + 0.35)):
        pred_bin = binarize(ProbabilityMap(pred), 0.5)
        print(f"  {name:<20} fpr={fpr(pred_bin, empty):.3f} tnr={tnr(pred_bin, empty):.3f}")


if __name__ == "__main__":
    main()
