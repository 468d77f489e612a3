"""Toolkit for camouflaged-object-detection evaluation, pseudo-label curation,
and k-shot frugal-learning protocols.

The package is organized around five concerns:

- :mod:`codbench.core` — mask/map/manifest types and bit-exact file I/O
- :mod:`codbench.metrics` — MAE, S-measure, E-measure, weighted F-measure,
  foreground ratio, FPR/TNR, and batch reports
- :mod:`codbench.curation` — pseudo-label rejection and loss re-weighting
- :mod:`codbench.harness` — seeded k-shot sampling, run registry, statistics
- :mod:`codbench.inpaint` — sliding-window tile masks and similarity scoring
"""

from .config import GlobalConfig
from .core import (
    BinaryMask,
    CurationConfig,
    ProbabilityMap,
    PseudoLabelRecord,
    TrainingManifest,
    binarize,
    load_binary_mask,
    load_detections,
    load_probability_map,
    resize_to,
    save_binary_mask,
    save_probability_map,
)
from .curation import build_manifest, minmax_scale, partition_by_confidence, partition_by_fg_ratio
from .harness import (
    RunSeries,
    SamplePlan,
    cumulative_stats,
    draw_samples,
    run_protocol,
    split_dataset,
    summarize_cells,
)
from .inpaint import TileGrid, emit_tile_masks, make_grid, score_tiles, similarity_to_heatmap
from .metrics import (
    BackgroundReport,
    MetricReport,
    e_measure,
    foreground_ratio,
    fpr,
    mae,
    relative_gap,
    relative_improvement,
    s_measure,
    tnr,
    weighted_f_measure,
)

__version__ = "0.1.0"

__all__ = [
    "BackgroundReport",
    "BinaryMask",
    "CurationConfig",
    "GlobalConfig",
    "MetricReport",
    "ProbabilityMap",
    "PseudoLabelRecord",
    "RunSeries",
    "SamplePlan",
    "TileGrid",
    "TrainingManifest",
    "binarize",
    "build_manifest",
    "cumulative_stats",
    "draw_samples",
    "e_measure",
    "emit_tile_masks",
    "foreground_ratio",
    "fpr",
    "load_binary_mask",
    "load_detections",
    "load_probability_map",
    "mae",
    "make_grid",
    "minmax_scale",
    "partition_by_confidence",
    "partition_by_fg_ratio",
    "relative_gap",
    "relative_improvement",
    "resize_to",
    "run_protocol",
    "s_measure",
    "save_binary_mask",
    "save_probability_map",
    "score_tiles",
    "similarity_to_heatmap",
    "split_dataset",
    "summarize_cells",
    "tnr",
    "weighted_f_measure",
]
