"""Sliding-window tile masks and original-vs-inpainted tile scoring."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BinaryMask, ProbabilityMap, atomic_write_text, save_binary_mask

#: Tile edge lengths probed by default (coarse to fine).
DEFAULT_TILE_SIZES = (128, 64, 32)

_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2

SIMILARITY_METRICS = ("pixel", "region", "ssim")


@dataclass(frozen=True)
class Tile:
    row: int
    col: int
    y0: int
    x0: int
    y1: int
    x1: int

    @property
    def area(self) -> int:
        return (self.y1 - self.y0) * (self.x1 - self.x0)


@dataclass(frozen=True)
class TileGrid:
    """Sliding-window tiling of an image; edge tiles may be smaller.

    With the default stride (= tile_size) the tiles partition the image
    exactly; a smaller stride yields overlapping windows.
    """

    width: int
    height: int
    tile_size: int
    stride: int
    tiles: tuple[Tile, ...]

    @property
    def n_rows(self) -> int:
        return max(t.row for t in self.tiles) + 1

    @property
    def n_cols(self) -> int:
        return max(t.col for t in self.tiles) + 1

    @property
    def is_partition(self) -> bool:
        return self.stride == self.tile_size


@dataclass(frozen=True)
class TileScore:
    row: int
    col: int
    pixel: float
    region: float
    ssim: float


@dataclass(frozen=True)
class TileSimilarityMap:
    grid: TileGrid
    scores: tuple[TileScore, ...]


def make_grid(width: int, height: int, tile_size: int, stride: int | None = None) -> TileGrid:
    """Tile an image of the given size; the last row/column is clipped to fit."""
    if width < 1 or height < 1:
        raise ValueError(f"image dims must be >= 1, got {width}x{height}")
    if tile_size < 1:
        raise ValueError(f"tile_size must be >= 1, got {tile_size}")
    stride = tile_size if stride is None else stride
    if not 1 <= stride <= tile_size:
        raise ValueError(f"stride must be in [1, tile_size], got {stride}")

    def starts(extent: int) -> list[int]:
        pos = list(range(0, max(extent - tile_size, 0) + 1, stride))
        if pos[-1] + tile_size < extent:
            pos.append(pos[-1] + stride)
        return pos

    tiles = []
    for r, y0 in enumerate(starts(height)):
        for c, x0 in enumerate(starts(width)):
            tiles.append(
                Tile(r, c, y0, x0, min(y0 + tile_size, height), min(x0 + tile_size, width))
            )
    return TileGrid(width=width, height=height, tile_size=tile_size, stride=stride, tiles=tuple(tiles))


def emit_tile_masks(
    width: int,
    height: int,
    tile_size: int,
    out_dir: str | Path,
    stride: int | None = None,
) -> list[Path]:
    """Write one binary hole mask PNG per tile (tile region = foreground).

    Files are named ``tile_{row}_{col}.png``; these are the inpainting holes
    consumed by the external inpainter.
    """
    grid = make_grid(width, height, tile_size, stride)
    out_dir = Path(out_dir)
    paths = []
    for tile in grid.tiles:
        mask = np.zeros((height, width), dtype=np.uint8)
        mask[tile.y0 : tile.y1, tile.x0 : tile.x1] = 1
        paths.append(save_binary_mask(BinaryMask(mask), out_dir / f"tile_{tile.row}_{tile.col}.png"))
    return paths


def _tile_ssim(a: np.ndarray, b: np.ndarray) -> float:
    n = a.size
    ma = float(a.mean())
    mb = float(b.mean())
    norm = max(n - 1, 1)  # sample statistics; a 1-pixel tile degrades to variance 0
    va = float(((a - ma) ** 2).sum()) / norm
    vb = float(((b - mb) ** 2).sum()) / norm
    cov = float(((a - ma) * (b - mb)).sum()) / norm
    score = ((2.0 * ma * mb + _SSIM_C1) * (2.0 * cov + _SSIM_C2)) / (
        (ma * ma + mb * mb + _SSIM_C1) * (va + vb + _SSIM_C2)
    )
    return min(max(score, 0.0), 1.0)


def score_tiles(original, inpainted, grid: TileGrid) -> TileSimilarityMap:
    """Per-tile similarity between an original image and its inpainted version.

    Three scores per tile, each in [0, 1]: pixel similarity (one minus the
    mean per-pixel difference), region similarity (one minus the tile MAE;
    identical at tile granularity, kept as its own column), and a
    single-statistic SSIM over the whole tile.
    """
    a = np.asarray(getattr(original, "values", original), dtype=np.float64)
    b = np.asarray(getattr(inpainted, "values", inpainted), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: original {a.shape} vs inpainted {b.shape}")
    if a.shape != (grid.height, grid.width):
        raise ValueError(f"grid is {grid.width}x{grid.height} but images are {a.shape[::-1]}")
    scores = []
    for tile in grid.tiles:
        ta = a[tile.y0 : tile.y1, tile.x0 : tile.x1]
        tb = b[tile.y0 : tile.y1, tile.x0 : tile.x1]
        diff = float(np.abs(ta - tb).mean())
        scores.append(
            TileScore(
                row=tile.row,
                col=tile.col,
                pixel=min(max(1.0 - diff, 0.0), 1.0),
                region=min(max(1.0 - diff, 0.0), 1.0),
                ssim=_tile_ssim(ta, tb),
            )
        )
    return TileSimilarityMap(grid=grid, scores=tuple(scores))


def similarity_to_heatmap(sim_map: TileSimilarityMap, metric: str) -> ProbabilityMap:
    """Paint each tile's score over its rect (nearest-neighbor upsampling)."""
    if metric not in SIMILARITY_METRICS:
        raise ValueError(f"metric must be one of {SIMILARITY_METRICS}, got {metric!r}")
    grid = sim_map.grid
    if not grid.is_partition:
        raise ValueError("heatmaps require a non-overlapping grid (stride == tile_size)")
    out = np.zeros((grid.height, grid.width), dtype=np.float64)
    by_pos = {(s.row, s.col): s for s in sim_map.scores}
    for tile in grid.tiles:
        out[tile.y0 : tile.y1, tile.x0 : tile.x1] = getattr(by_pos[(tile.row, tile.col)], metric)
    return ProbabilityMap(out)


def write_scores_csv(sim_map: TileSimilarityMap, path: str | Path, config_echo: dict | None = None) -> Path:
    lines = [f"# {key}={value}" for key, value in sorted((config_echo or {}).items())]
    lines.append(f"# tile_size={sim_map.grid.tile_size}")
    lines.append(f"# stride={sim_map.grid.stride}")
    lines.append("row,col,pixel,region,ssim")
    for s in sorted(sim_map.scores, key=lambda s: (s.row, s.col)):
        lines.append(f"{s.row},{s.col},{s.pixel:.6f},{s.region:.6f},{s.ssim:.6f}")
    return atomic_write_text(path, "\n".join(lines) + "\n")
