"""Command-line interface: evaluation, curation, protocol, and inpaint flows."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, inpaint, metrics
from .config import GlobalConfig, default_workers, load_toml_config
from .core import (
    CurationConfig,
    DetectionsError,
    atomic_write_text,
    list_image_stems,
    load_detections,
    load_probability_map,
    pair_stems,
    save_manifest,
    save_probability_map,
)
from .curation import build_manifest

PROG = "cod-bench"

# Real defaults for flags that a --config TOML file may override.  Argparse
# defaults stay None so explicit command-line values always win over TOML.
_DEFAULTS = {
    "binarize_threshold": 0.5,
    "em_threshold": "adaptive",
    "epsilon": metrics.EPS,
    "workers": None,  # resolved via COD_BENCH_WORKERS, then 1
    "seed": 0,
    "t_c": None,
    "t_f": None,
    "reweight": False,
    "scale_over_all": False,
    "split": None,
    "confidence": 0.95,
    "metric": "f_beta_w",
    "method": None,
    "k": None,
    "stride": None,
    "width": 512,
    "height": 512,
    "heatmap_dir": None,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("global options")
    group.add_argument("--config", type=Path, default=None, help="TOML file presetting any flag")
    group.add_argument(
        "--binarize-threshold",
        type=float,
        default=None,
        help="threshold for binarizing soft maps (default 0.5, strict >)",
    )
    group.add_argument(
        "--em-threshold",
        default=None,
        help="E-measure threshold: 'adaptive' (default) or a fixed value in [0, 1]",
    )
    group.add_argument(
        "--epsilon", type=float, default=None, help=f"guard for divisions (default {metrics.EPS})"
    )
    group.add_argument(
        "--workers",
        type=int,
        default=None,
        help="parallel workers (default: $COD_BENCH_WORKERS or 1)",
    )
    group.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")


class _Resolver:
    """Layer flag values: command line, then --config TOML, then defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.toml = load_toml_config(args.config) if getattr(args, "config", None) else {}

    def get(self, dest: str):
        value = getattr(self.args, dest, None)
        if value is not None:
            return value
        if dest in self.toml:
            return self.toml[dest]
        return _DEFAULTS.get(dest)

    def global_config(self) -> GlobalConfig:
        em_raw = self.get("em_threshold")
        em = None if em_raw in (None, "adaptive") else float(em_raw)
        workers = self.get("workers")
        return GlobalConfig(
            binarize_threshold=float(self.get("binarize_threshold")),
            em_threshold=em,
            epsilon=float(self.get("epsilon")),
            workers=int(workers) if workers is not None else default_workers(),
            seed=int(self.get("seed")),
        )


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_eval(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    cfg = res.global_config()
    pairs, only_pred, only_gt = pair_stems(args.pred, args.gt)
    if not pairs:
        print("error: no filename stems shared between prediction and gt directories", file=sys.stderr)
        return 1
    notes = [f"no ground truth for prediction stem {s}; skipped" for s in only_pred]
    notes += [f"no prediction for ground-truth stem {s}; skipped" for s in only_gt]
    for note in notes:
        _warn(note)
    report = metrics.evaluate_pairs(
        pairs,
        binarize_threshold=cfg.binarize_threshold,
        em_threshold=cfg.em_threshold,
        eps=cfg.epsilon,
        workers=cfg.workers,
        extra_warnings=notes,
    )
    out = Path(args.out)
    metrics.write_report_json(report, out.with_suffix(".json"), cfg.echo())
    metrics.write_report_csv(report, out.with_suffix(".csv"), cfg.echo())
    agg = report.aggregate
    print(
        f"evaluated {len(report.per_image)} images: "
        + " ".join(f"{k}={agg[k]:.6f}" for k in metrics.METRIC_COLUMNS)
    )
    return 0


def cmd_eval_bg(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    cfg = res.global_config()
    stems = list_image_stems(args.pred)
    if not stems:
        print(f"error: no prediction images under {args.pred}", file=sys.stderr)
        return 1
    report = metrics.evaluate_background(
        sorted(stems.items()),
        binarize_threshold=cfg.binarize_threshold,
        workers=cfg.workers,
    )
    out = Path(args.out)
    metrics.write_background_json(report, out.with_suffix(".json"), cfg.echo())
    metrics.write_background_csv(report, out.with_suffix(".csv"), cfg.echo())
    agg = report.aggregate
    print(f"evaluated {len(report.per_image)} background images: fpr={agg['fpr']:.6f} tnr={agg['tnr']:.6f}")
    return 0


def cmd_curate(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    t_c = res.get("t_c")
    t_f = res.get("t_f")
    curation_cfg = CurationConfig(
        t_c=float(t_c) if t_c is not None else None,
        t_f=float(t_f) if t_f is not None else None,
        reweight=bool(res.get("reweight")),
        scale_over="all" if res.get("scale_over_all") else "survivors",
    )
    records = load_detections(args.detections)
    manifest = build_manifest(records, curation_cfg, mask_root=args.masks)
    save_manifest(manifest, args.out)
    weights = [s.weight for s in manifest.accepted]
    span = f"[{min(weights):.6f}, {max(weights):.6f}]" if weights else "[]"
    print(
        f"accepted={len(manifest.accepted)} rejected={len(manifest.rejected)} "
        f"weight_range={span}"
    )
    if not manifest.accepted:
        print("error: curation rejected every record (S1 is empty)", file=sys.stderr)
        return 1
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    cfg = res.global_config()
    pool = harness.load_pool(args.pool)
    split = res.get("split")
    out_dir = Path(args.out)
    if split is not None:
        fractions = tuple(float(f) for f in split)
        if len(fractions) != 3:
            print("error: --split takes exactly three fractions", file=sys.stderr)
            return 1
        train, val, test = harness.split_dataset(pool, fractions, cfg.seed)
        for name, ids in (("train", train), ("val", val), ("test", test)):
            atomic_write_text(out_dir / f"split_{name}.txt", "\n".join(ids) + "\n")
        print(f"split {len(pool)} ids into {len(train)}/{len(val)}/{len(test)}")
        pool = train
    plan = harness.SamplePlan(k=args.k, runs=args.runs, seed=cfg.seed, train_pool=tuple(pool))
    paths = harness.write_sample_manifests(plan, out_dir)
    print(f"wrote {len(paths)} sample manifests to {out_dir}")
    return 0


def _parse_k(raw: str) -> int | str:
    return raw if raw in (harness.BASE_LABEL, harness.FULL_LABEL) else int(raw)


def cmd_stats(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    cfg = res.global_config()
    source = Path(args.input)
    if source.suffix == ".jsonl":
        method = res.get("method")
        k = res.get("k")
        if method is None or k is None:
            print("error: --method and --k are required for registry input", file=sys.stderr)
            return 1
        records = harness.load_registry(source)
        series = harness.series_from_registry(records, method, _parse_k(str(k)), res.get("metric"))
        if not series.values:
            print(f"error: no completed runs for {method}/k={k}", file=sys.stderr)
            return 1
    else:
        values = [float(v) for v in source.read_text(encoding="utf-8").split()]
        series = harness.RunSeries(label=source.stem, values=tuple(values))
    stats = harness.cumulative_stats(series, confidence=float(res.get("confidence")))
    out = Path(args.out)
    harness.write_stats_csv(stats, out.with_suffix(".csv"), cfg.echo())
    last = stats.rows[-1]
    width = "n/a" if last.ci_low is None else f"{last.ci_high - last.ci_low:.6f}"
    print(f"n={last.n} cum_mean={last.cum_mean:.6f} ci_width={width}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    cfg = res.global_config()
    metric = res.get("metric")
    records = harness.load_registry(args.registry)
    if not records:
        print(f"error: registry {args.registry} is empty or missing", file=sys.stderr)
        return 1
    cells, failed = harness.registry_cells(records, metric)
    rows = harness.summarize_cells(cells)
    out = Path(args.out)
    atomic_write_text(out.with_suffix(".csv"), harness.render_summary_csv(rows, metric, cfg.echo()))
    atomic_write_text(
        out.with_suffix(".md"),
        harness.render_summary_markdown(rows, metric, failed, cfg.echo()),
    )
    print(f"summarized {len(rows)} cells ({len(failed)} failed runs) to {out}.csv/.md")
    return 0


def _tile_sizes(args: argparse.Namespace) -> list[int]:
    return list(args.tile) if args.tile else list(inpaint.DEFAULT_TILE_SIZES)


def cmd_inpaint_emit_masks(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    width = int(res.get("width"))
    height = int(res.get("height"))
    stride = res.get("stride")
    out_dir = Path(args.out)
    total = 0
    for size in _tile_sizes(args):
        paths = inpaint.emit_tile_masks(
            width, height, size, out_dir / f"tiles_{size}", stride=int(stride) if stride else None
        )
        print(f"tile {size}px: {len(paths)} masks")
        total += len(paths)
    print(f"wrote {total} hole masks to {out_dir}")
    return 0


def cmd_inpaint_score(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    cfg = res.global_config()
    stride = res.get("stride")
    original = load_probability_map(args.original)
    inpainted = load_probability_map(args.inpainted)
    out = Path(args.out)
    heatmap_dir = res.get("heatmap_dir")
    for size in _tile_sizes(args):
        grid = inpaint.make_grid(
            original.width, original.height, size, stride=int(stride) if stride else None
        )
        sim = inpaint.score_tiles(original, inpainted, grid)
        inpaint.write_scores_csv(sim, Path(f"{out}_tile{size}.csv"), cfg.echo())
        if heatmap_dir:
            for metric in inpaint.SIMILARITY_METRICS:
                heat = inpaint.similarity_to_heatmap(sim, metric)
                save_probability_map(heat, Path(heatmap_dir) / f"heatmap_tile{size}_{metric}.png")
        lows = min(s.ssim for s in sim.scores)
        print(f"tile {size}px: {len(sim.scores)} tiles, min ssim {lows:.6f}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Camouflaged-object-detection evaluation, curation, and k-shot protocol toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate prediction maps against ground-truth masks")
    p.add_argument("--pred", required=True, type=Path, help="directory of prediction images")
    p.add_argument("--gt", required=True, type=Path, help="directory of ground-truth masks")
    p.add_argument("--out", required=True, type=Path, help="output path prefix (.json/.csv)")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("eval-bg", help="FPR/TNR on object-free background images")
    p.add_argument("--pred", required=True, type=Path, help="directory of prediction images")
    p.add_argument("--out", required=True, type=Path, help="output path prefix (.json/.csv)")
    _add_common(p)
    p.set_defaults(func=cmd_eval_bg)

    p = sub.add_parser("curate", help="filter and re-weight pseudo-labels into a manifest")
    p.add_argument("--detections", required=True, type=Path, help="detections JSON file")
    p.add_argument("--masks", required=True, type=Path, help="directory of pseudo-label masks")
    p.add_argument("--t-c", dest="t_c", type=float, default=None, help="confidence threshold (keep >=)")
    p.add_argument("--t-f", dest="t_f", type=float, default=None, help="foreground-ratio threshold (keep <=)")
    p.add_argument(
        "--reweight",
        action="store_const",
        const=True,
        default=None,
        help="min-max scale surviving confidences into loss weights",
    )
    p.add_argument(
        "--scale-over-all",
        dest="scale_over_all",
        action="store_const",
        const=True,
        default=None,
        help="scale over the whole batch instead of the survivors",
    )
    p.add_argument("--out", required=True, type=Path, help="manifest JSON output path")
    _add_common(p)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("sample", help="draw per-run k-shot sample manifests")
    p.add_argument("--pool", required=True, type=Path, help="pool file, one image_id per line")
    p.add_argument("--k", required=True, type=int, help="sample size per run")
    p.add_argument("--runs", required=True, type=int, help="number of repeated runs")
    p.add_argument(
        "--split",
        nargs=3,
        type=float,
        default=None,
        metavar=("TRAIN", "VAL", "TEST"),
        help="first split the pool by these fractions and sample from the train part",
    )
    p.add_argument("--out", required=True, type=Path, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("stats", help="cumulative mean and confidence intervals for a run series")
    p.add_argument("--input", required=True, type=Path, help="registry .jsonl or plain values file")
    p.add_argument("--method", default=None, help="method name (registry input)")
    p.add_argument("--k", default=None, help="k cell: integer, 'base', or 'full' (registry input)")
    p.add_argument("--metric", default=None, help="metric column (default f_beta_w)")
    p.add_argument("--confidence", type=float, default=None, help="confidence level (default 0.95)")
    p.add_argument("--out", required=True, type=Path, help="output path prefix (.csv)")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="summary table over a run registry")
    p.add_argument("--registry", required=True, type=Path, help="registry .jsonl file")
    p.add_argument("--metric", default=None, help="metric column (default f_beta_w)")
    p.add_argument("--out", required=True, type=Path, help="output path prefix (.csv/.md)")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("inpaint", help="sliding-window inpainting probe")
    inpaint_sub = p.add_subparsers(dest="inpaint_command", required=True)

    q = inpaint_sub.add_parser("emit-masks", help="write per-tile hole masks for the inpainter")
    q.add_argument("--width", type=int, default=None, help="image width (default 512)")
    q.add_argument("--height", type=int, default=None, help="image height (default 512)")
    q.add_argument(
        "--tile",
        action="append",
        type=int,
        default=None,
        help="tile size in px; repeatable (default 128 64 32)",
    )
    q.add_argument("--stride", type=int, default=None, help="window stride (default: tile size)")
    q.add_argument("--out", required=True, type=Path, help="output directory")
    _add_common(q)
    q.set_defaults(func=cmd_inpaint_emit_masks)

    q = inpaint_sub.add_parser("score", help="score original vs inpainted image per tile")
    q.add_argument("--original", required=True, type=Path, help="original image")
    q.add_argument("--inpainted", required=True, type=Path, help="inpainted image")
    q.add_argument(
        "--tile",
        action="append",
        type=int,
        default=None,
        help="tile size in px; repeatable (default 128 64 32)",
    )
    q.add_argument("--stride", type=int, default=None, help="window stride (default: tile size)")
    q.add_argument("--heatmap-dir", dest="heatmap_dir", type=Path, default=None, help="also write heatmap PNGs here")
    q.add_argument("--out", required=True, type=Path, help="output path prefix for CSV files")
    _add_common(q)
    q.set_defaults(func=cmd_inpaint_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, DetectionsError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
