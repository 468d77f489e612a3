"""k-shot evaluation protocol: seeded sampling, run registry, statistics, tables."""

from __future__ import annotations

import json
import math
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .core import atomic_write_text, pair_stems
from .metrics import EPS, evaluate_pairs, relative_gap, relative_improvement

#: Cell keys on the k axis that are not shot counts.
BASE_LABEL = "base"
FULL_LABEL = "full"


@dataclass(frozen=True)
class SamplePlan:
    """How to draw the k-shot training subsets: k items per run, ``runs`` runs."""

    k: int
    runs: int
    seed: int
    train_pool: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if len(set(self.train_pool)) != len(self.train_pool):
            raise ValueError("train_pool contains duplicate ids")
        if self.k > len(self.train_pool):
            raise ValueError(f"k={self.k} exceeds pool size {len(self.train_pool)}")
        object.__setattr__(self, "train_pool", tuple(self.train_pool))


@dataclass(frozen=True)
class RunSeries:
    """Per-run aggregate metric values for one (method, k) cell."""

    label: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class StatsRow:
    n: int
    cum_mean: float
    ci_low: float | None
    ci_high: float | None


@dataclass(frozen=True)
class StatsSeries:
    label: str
    confidence: float
    rows: tuple[StatsRow, ...]


def _run_rng(seed: int, run: int) -> np.random.Generator:
    # Derived per-run stream; runs are numbered from 1 everywhere.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(run,)))


def draw_samples(plan: SamplePlan) -> list[list[str]]:
    """Draw ``runs`` samples of k distinct ids each, deterministically from the seed.

    Sampling is without replacement within a run and independent across runs,
    so the same id may recur in different runs.
    """
    samples = []
    for run in range(1, plan.runs + 1):
        idx = _run_rng(plan.seed, run).choice(len(plan.train_pool), size=plan.k, replace=False)
        samples.append([plan.train_pool[i] for i in idx])
    return samples


def sample_file_name(k: int, run: int) -> str:
    return f"k{k}_run{run}.txt"


def write_sample_manifests(plan: SamplePlan, out_dir: str | Path) -> list[Path]:
    """Emit one plain-text manifest per run (one image_id per line)."""
    out_dir = Path(out_dir)
    paths = []
    for run, sample in enumerate(draw_samples(plan), start=1):
        path = out_dir / sample_file_name(plan.k, run)
        atomic_write_text(path, "\n".join(sample) + "\n")
        paths.append(path)
    return paths


def load_pool(path: str | Path) -> list[str]:
    """Read an id-per-line pool file, skipping blank lines."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def split_dataset(
    ids: Sequence[str],
    fractions: tuple[float, float, float],
    seed: int,
) -> tuple[list[str], list[str], list[str]]:
    """Shuffle ids once and cut into (train, val, test) by the given fractions.

    Train and val sizes are the rounded fractions; the remainder goes to test.
    """
    if not ids:
        raise ValueError("cannot split an empty id list")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    n = len(ids)
    n_train = int(round(n * fractions[0]))
    n_val = min(int(round(n * fractions[1])), n - n_train)
    perm = np.random.default_rng(np.random.SeedSequence(entropy=seed)).permutation(n)
    shuffled = [ids[i] for i in perm]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )


def cumulative_stats(series: RunSeries | Sequence[float], confidence: float = 0.95) -> StatsSeries:
    """Cumulative mean with Student-t confidence intervals per prefix length.

    For each prefix of n runs: mean, and mean +/- t_{(1+confidence)/2, n-1} *
    s_n / sqrt(n) with the sample standard deviation.  The n = 1 row carries
    the mean only.  Student-t (not normal) because run counts stay small.
    """
    label = getattr(series, "label", "")
    values = [float(v) for v in getattr(series, "values", series)]
    if not values:
        raise ValueError("cannot compute statistics of an empty series")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    rows: list[StatsRow] = []
    for n in range(1, len(values) + 1):
        prefix = np.asarray(values[:n])
        mean = float(prefix.mean())
        if n == 1:
            rows.append(StatsRow(n, mean, None, None))
            continue
        sd = float(prefix.std(ddof=1))
        half = float(_scipy_stats.t.ppf((1.0 + confidence) / 2.0, n - 1)) * sd / math.sqrt(n)
        rows.append(StatsRow(n, mean, mean - half, mean + half))
    return StatsSeries(label=label, confidence=confidence, rows=tuple(rows))


def write_stats_csv(stats: StatsSeries, path: str | Path, config_echo: dict | None = None) -> Path:
    lines = [f"# {key}={value}" for key, value in sorted((config_echo or {}).items())]
    lines.append(f"# confidence={stats.confidence}")
    lines.append("n,cum_mean,ci_low,ci_high")
    for row in stats.rows:
        low = "" if row.ci_low is None else f"{row.ci_low:.6f}"
        high = "" if row.ci_high is None else f"{row.ci_high:.6f}"
        lines.append(f"{row.n},{row.cum_mean:.6f},{low},{high}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Run registry (JSON lines, append-only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    method: str
    k: int | str
    run: int
    metrics: Mapping[str, float]
    status: str  # "ok" | "failed"
    error: str | None = None

    def to_dict(self) -> dict:
        payload = {
            "method": self.method,
            "k": self.k,
            "run": self.run,
            "metrics": dict(self.metrics),
            "status": self.status,
        }
        if self.error is not None:
            payload["error"] = self.error
        return payload


def load_registry(path: str | Path) -> list[RunRecord]:
    path = Path(path)
    if not path.is_file():
        return []
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        records.append(
            RunRecord(
                method=data["method"],
                k=data["k"],
                run=int(data["run"]),
                metrics=data.get("metrics", {}),
                status=data["status"],
                error=data.get("error"),
            )
        )
    return records


def append_record(path: str | Path, record: RunRecord) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    line = json.dumps(record.to_dict(), sort_keys=True) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()


def series_from_registry(
    records: Sequence[RunRecord], method: str, k: int | str, metric: str
) -> RunSeries:
    """Collect one cell's per-run values (completed runs only, ordered by run)."""
    cell = sorted(
        (r for r in records if r.method == method and r.k == k and r.status == "ok"),
        key=lambda r: r.run,
    )
    return RunSeries(
        label=f"{method}/k={k}",
        values=tuple(float(r.metrics[metric]) for r in cell),
    )


# ---------------------------------------------------------------------------
# Summary tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    method: str
    k: int | str
    n_runs: int
    mean: float
    improvement: float | None  # vs the method's "base" cell, if present
    gap: float | None          # vs the method's "full" cell, if present


def _k_order(k: int | str) -> tuple[int, int]:
    if k == BASE_LABEL:
        return (0, 0)
    if k == FULL_LABEL:
        return (2, 0)
    return (1, int(k))


def summarize_cells(cells: Mapping[tuple[str, int | str], RunSeries]) -> list[SummaryRow]:
    """Per-cell means plus improvement-over-base and gap-to-full columns."""
    means = {key: float(np.mean(series.values)) for key, series in cells.items() if series.values}
    rows: list[SummaryRow] = []
    for (method, k), series in cells.items():
        if not series.values:
            continue
        mean = means[(method, k)]
        base = means.get((method, BASE_LABEL))
        full = means.get((method, FULL_LABEL))
        improvement = (
            relative_improvement(mean, base) if base is not None and k != BASE_LABEL else None
        )
        gap = relative_gap(full, mean) if full is not None else None
        rows.append(SummaryRow(method, k, len(series.values), mean, improvement, gap))
    rows.sort(key=lambda r: (r.method, _k_order(r.k)))
    return rows


def registry_cells(
    records: Sequence[RunRecord], metric: str
) -> tuple[dict[tuple[str, int | str], RunSeries], list[RunRecord]]:
    """Group completed registry records into (method, k) cells; return failures too."""
    keys = sorted({(r.method, r.k) for r in records}, key=lambda mk: (mk[0], _k_order(mk[1])))
    cells = {key: series_from_registry(records, key[0], key[1], metric) for key in keys}
    failed = [r for r in records if r.status != "ok"]
    return cells, failed


def _fmt_opt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def render_summary_csv(rows: Sequence[SummaryRow], metric: str, config_echo: dict | None = None) -> str:
    lines = [f"# {key}={value}" for key, value in sorted((config_echo or {}).items())]
    lines.append(f"method,k,n_runs,mean_{metric},improvement_vs_base,gap_vs_full")
    for row in rows:
        lines.append(
            f"{row.method},{row.k},{row.n_runs},{row.mean:.6f},"
            f"{_fmt_opt(row.improvement)},{_fmt_opt(row.gap)}"
        )
    return "\n".join(lines) + "\n"


def render_summary_markdown(
    rows: Sequence[SummaryRow],
    metric: str,
    failed: Sequence[RunRecord] = (),
    config_echo: dict | None = None,
) -> str:
    lines = [f"# k-shot summary ({metric})", ""]
    if config_echo:
        lines.append("Config: " + ", ".join(f"{k}={v}" for k, v in sorted(config_echo.items())))
        lines.append("")
    lines.append(f"| method | k | runs | mean {metric} | improvement vs base | gap vs full |")
    lines.append("|---|---|---|---|---|---|")
    for row in rows:
        improvement = "—" if row.improvement is None else f"{row.improvement:.6f}"
        gap = "—" if row.gap is None else f"{row.gap:.6f}"
        lines.append(
            f"| {row.method} | {row.k} | {row.n_runs} | {row.mean:.6f} | {improvement} | {gap} |"
        )
    lines.append("")
    if failed:
        names = ", ".join(f"{r.method}/k={r.k}/run{r.run}" for r in failed)
        lines.append(f"Failed runs (excluded from statistics): {names}")
    else:
        lines.append("Failed runs: none")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Protocol driver
# ---------------------------------------------------------------------------

REGISTRY_NAME = "registry.jsonl"


def run_protocol(
    plan: SamplePlan,
    gt_dir: str | Path,
    out_dir: str | Path,
    method: str,
    trainer_cmd: str | None = None,
    pred_root: str | Path | None = None,
    binarize_threshold: float = 0.5,
    em_threshold: float | None = None,
    eps: float = EPS,
    workers: int = 1,
) -> list[RunRecord]:
    """Sample, (optionally) train via an external hook, evaluate, and register.

    Exactly one of ``trainer_cmd`` (a shell template with {manifest},
    {out_dir}, and {k} placeholders that must write one prediction PNG per
    test image) or ``pred_root`` (precomputed predictions under
    ``pred_root/k{K}_run{R}/``) must be given.  Completed runs found in the
    registry are skipped, so the sweep is resumable; failed runs are recorded
    and the protocol continues.
    """
    if (trainer_cmd is None) == (pred_root is None):
        raise ValueError("provide exactly one of trainer_cmd or pred_root")
    gt_dir = Path(gt_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    registry_path = out_dir / REGISTRY_NAME

    done = {(r.method, r.k, r.run) for r in load_registry(registry_path)}
    samples = draw_samples(plan)
    lock = threading.Lock()

    def execute(run: int) -> None:
        if (method, plan.k, run) in done:
            return
        manifest = out_dir / sample_file_name(plan.k, run)
        atomic_write_text(manifest, "\n".join(samples[run - 1]) + "\n")

        record: RunRecord
        try:
            pred_dir = _run_predictions(manifest, run)
            pairs, _, _ = pair_stems(pred_dir, gt_dir)
            if not pairs:
                raise RuntimeError(f"no prediction/gt pairs under {pred_dir}")
            report = evaluate_pairs(
                pairs,
                binarize_threshold=binarize_threshold,
                em_threshold=em_threshold,
                eps=eps,
            )
            record = RunRecord(method, plan.k, run, report.aggregate, "ok")
        except (OSError, RuntimeError, ValueError) as exc:
            record = RunRecord(method, plan.k, run, {}, "failed", error=str(exc))
        with lock:
            append_record(registry_path, record)

    def _run_predictions(manifest: Path, run: int) -> Path:
        if pred_root is not None:
            pred_dir = Path(pred_root) / f"k{plan.k}_run{run}"
            if not pred_dir.is_dir():
                raise RuntimeError(f"missing precomputed prediction directory {pred_dir}")
            return pred_dir
        pred_dir = out_dir / f"k{plan.k}_run{run}"
        pred_dir.mkdir(parents=True, exist_ok=True)
        cmd = trainer_cmd.format(manifest=str(manifest), out_dir=str(pred_dir), k=plan.k)
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(
                f"trainer hook exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
        return pred_dir

    runs = range(1, plan.runs + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(execute, runs))
    else:
        for run in runs:
            execute(run)
    return load_registry(registry_path)
