"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Tolerances are fixed here and nowhere else.
"""

from __future__ import annotations

import time
import warnings

import numpy as np
import pytest

from codbench import metrics
from codbench.cli import main as cli_main
from codbench.core import CurationConfig, load_detections
from codbench.curation import build_manifest, minmax_scale, partition_by_confidence, partition_by_fg_ratio
from codbench.harness import RunSeries, cumulative_stats, split_dataset
from codbench.inpaint import make_grid, score_tiles

from conftest import FIXTURES, blob_mask
import oracles

SYNTH = FIXTURES / "synth"
GOLDEN = FIXTURES / "golden"


def _pass(num: int, text: str) -> None:
    print(f"ACCEPTANCE {num:02d} PASS  {text}")


@pytest.fixture(autouse=True)
def _no_worker_env(monkeypatch):
    monkeypatch.delenv("COD_BENCH_WORKERS", raising=False)


def test_criterion_01_metric_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.monotonic()
    n_pairs = 100
    for i in range(n_pairs):
        pred, gt = oracles.random_pair(rng, 8, 64)
        assert metrics.mae(pred, gt) == pytest.approx(oracles.mae_ref(pred, gt), abs=1e-6)
        assert metrics.s_measure(pred, gt) == pytest.approx(
            oracles.s_measure_ref(pred, gt), abs=1e-6
        )
        assert metrics.e_measure(pred, gt) == pytest.approx(
            oracles.e_measure_ref(pred, gt), abs=1e-6
        )
        assert metrics.weighted_f_measure(pred, gt) == pytest.approx(
            oracles.weighted_f_ref(pred, gt), abs=1e-6
        )
        assert metrics.foreground_ratio(gt) == oracles.fg_ratio_ref(gt)  # counting: exact
        # Background rates on an object-free ground truth: exact counting.
        empty = np.zeros_like(gt)
        pred_bin = (pred > 0.5).astype(np.uint8)
        assert metrics.fpr(pred_bin, empty) == oracles.fpr_ref(pred_bin, empty)
        assert metrics.tnr(pred_bin, empty) == oracles.tnr_ref(pred_bin, empty)
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"oracle equivalence took {elapsed:.1f}s (budget 30s)"
    _pass(1, f"7 metrics match naive oracles on {n_pairs} random pairs within 1e-6 ({elapsed:.1f}s)")


def test_criterion_02_perfect_prediction_identities():
    gt = blob_mask(16, 16, 3, 3, 13, 13)
    pred = gt.astype(np.float64)
    assert metrics.mae(pred, gt) == 0.0
    assert metrics.s_measure(pred, gt) == pytest.approx(1.0, abs=1e-6)
    assert metrics.e_measure(pred, gt) >= 0.999
    assert metrics.weighted_f_measure(pred, gt) >= 0.999999

    empty = np.zeros((8, 8), np.uint8)
    assert metrics.s_measure(np.zeros((8, 8)), empty) == 1.0  # 1 - mean(pred), exactly
    assert metrics.s_measure(np.ones((8, 8)), empty) == 0.0
    assert metrics.s_measure(np.full((8, 8), 0.25), empty) == 0.75
    assert metrics.s_measure(np.full((8, 8), 0.25), np.ones((8, 8), np.uint8)) == 0.25
    assert metrics.e_measure(np.zeros((8, 8)), empty) == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert metrics.weighted_f_measure(np.zeros((8, 8)), empty) == 0.0
    _pass(2, "perfect-prediction identities and degenerate branches hold")


def test_criterion_03_paper_arithmetic():
    assert 0.46 <= metrics.relative_improvement(0.828, 0.564) <= 0.47
    assert 0.33 <= metrics.relative_improvement(0.753, 0.564) <= 0.34
    assert 0.11 <= metrics.relative_gap(0.828, 0.734) <= 0.12
    _pass(3, "relative improvement/gap reproduce the reported 46%/33%/~10%")


def test_criterion_04_curation_matches_hand_computation():
    records = load_detections(SYNTH / "detections.json")
    assert len(records) == 20

    # Hand-computed from the fixture confidences (>= 0.3 stays).
    expected_s1_conf = {
        "pl_000", "pl_002", "pl_004", "pl_005", "pl_007", "pl_008", "pl_010",
        "pl_011", "pl_013", "pl_014", "pl_015", "pl_017", "pl_018", "pl_019",
    }
    s1, s2 = partition_by_confidence(records, 0.3)
    assert {r.image_id for r in s1} == expected_s1_conf
    assert {r.image_id for r in s2} == {r.image_id for r in records} - expected_s1_conf

    # Hand-computed from the fixture mask foreground ratios (<= 0.3 stays).
    expected_s1_ratio = {
        "pl_000", "pl_001", "pl_002", "pl_004", "pl_006", "pl_007", "pl_009",
        "pl_010", "pl_012", "pl_013", "pl_015", "pl_017", "pl_018", "pl_019",
    }
    k1, k2, errors = partition_by_fg_ratio(records, 0.3, SYNTH / "masks")
    assert not errors
    assert {r.image_id for r in k1} == expected_s1_ratio
    assert {r.image_id for r in k2} == {r.image_id for r in records} - expected_s1_ratio

    # Min-max weights: argmin -> 0, argmax -> 1 over the combined survivors.
    manifest = build_manifest(records, CurationConfig(t_c=0.3, t_f=0.3, reweight=True), SYNTH / "masks")
    weights = {s.image_id: s.weight for s in manifest.accepted}
    assert set(weights) == expected_s1_conf & expected_s1_ratio
    assert weights["pl_002"] == 0.0  # lowest surviving confidence (0.30)
    assert weights["pl_004"] == 1.0  # highest surviving confidence (0.92)
    assert all(0.0 <= w <= 1.0 for w in weights.values())

    # Degenerate equal-confidence batch scales to weight 1 everywhere.
    equal = [r for r in records][:5]
    from codbench.core import PseudoLabelRecord

    equal = [PseudoLabelRecord(r.image_id, r.mask_ref, 0.5) for r in equal]
    assert all(s.scaled == 1.0 for s in minmax_scale(equal))
    _pass(4, "20-record curation fixture partitions and weights match hand computation")


def test_criterion_05_protocol_statistics():
    # Arithmetic series b*i has closed-form prefix means b*(n+1)/2 and sample
    # variance b^2 * n*(n+1)/12.
    b = 0.02
    values = [b * i for i in range(1, 31)]
    stats = cumulative_stats(RunSeries("arith", tuple(values)), confidence=0.95)
    for row in stats.rows:
        assert row.cum_mean == pytest.approx(b * (row.n + 1) / 2.0, abs=1e-12)
    reference = oracles.cumulative_stats_ref(values, 0.95)
    for row, (n, mean, low, high) in zip(stats.rows, reference):
        assert row.n == n
        assert row.cum_mean == pytest.approx(mean, abs=1e-12)
        if n > 1:
            assert row.ci_low == pytest.approx(low, abs=1e-9)
            assert row.ci_high == pytest.approx(high, abs=1e-9)
    # And on a noisy series the final cumulative mean is the plain mean.
    rng = np.random.default_rng(55)
    noisy = rng.random(30)
    final = cumulative_stats(RunSeries("noisy", tuple(noisy))).rows[-1]
    assert final.cum_mean == pytest.approx(float(noisy.mean()), abs=1e-12)
    _pass(5, "cumulative means within 1e-12 and Student-t CI bounds within 1e-9 up to n=30")


def test_criterion_06_split_sizes():
    ids = [f"id_{i}" for i in range(1000)]
    train, val, test = split_dataset(ids, (0.48, 0.12, 0.40), seed=1)
    assert (len(train), len(val), len(test)) == (480, 120, 400)
    assert sorted(train + val + test) == sorted(ids)
    _pass(6, "split_dataset(1000, 0.48/0.12/0.40) = 480/120/400")


def test_criterion_07_end_to_end_golden(tmp_path):
    start = time.monotonic()
    assert cli_main([
        "eval", "--pred", str(SYNTH / "preds"), "--gt", str(SYNTH / "gts"),
        "--out", str(tmp_path / "eval_report"),
    ]) == 0
    assert cli_main([
        "curate", "--detections", str(SYNTH / "detections.json"),
        "--masks", str(SYNTH / "masks"), "--t-c", "0.3", "--reweight",
        "--out", str(tmp_path / "manifest.json"),
    ]) == 0
    assert cli_main([
        "report", "--registry", str(SYNTH / "registry.jsonl"),
        "--out", str(tmp_path / "summary"),
    ]) == 0
    elapsed = time.monotonic() - start
    for name in ("eval_report.json", "eval_report.csv", "manifest.json",
                 "summary.csv", "summary.md"):
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes(), name
    assert elapsed < 10.0, f"golden pipeline took {elapsed:.1f}s (budget 10s)"
    _pass(7, f"eval+curate+report reproduce committed goldens byte-for-byte ({elapsed:.1f}s)")


def test_criterion_08_background_evaluation(tmp_path):
    items = sorted(
        (p.stem, p) for p in (SYNTH / "bg_preds").glob("*.png")
    )
    report = metrics.evaluate_background(items)
    rows = {r.image_id: r for r in report.per_image}
    assert rows["bg_000"].fpr == 0.68
    assert rows["bg_000"].tnr == 0.32
    for row in report.per_image:
        assert row.fpr + row.tnr == 1.0
    _pass(8, "68% fixture gives FPR 0.68 / TNR 0.32 exactly; fpr + tnr = 1 per image")


def test_criterion_09_tiling():
    expected = {128: 16, 64: 64, 32: 256}
    for tile, count in expected.items():
        grid = make_grid(512, 512, tile)
        assert len(grid.tiles) == count
        cover = np.zeros((512, 512), dtype=np.int32)
        for t in grid.tiles:
            cover[t.y0 : t.y1, t.x0 : t.x1] += 1
        assert (cover == 1).all()
        img = np.random.default_rng(tile).random((512, 512))
        sim = score_tiles(img, img.copy(), grid)
        assert all(s.pixel == 1.0 and s.region == 1.0 and s.ssim == 1.0 for s in sim.scores)
    _pass(9, "512x512 tilings give 16/64/256 exact partitions with self-similarity 1.0")


def test_criterion_10_determinism(tmp_path):
    pool = SYNTH / "pool.txt"
    invocations = {
        "eval": ["eval", "--pred", str(SYNTH / "preds"), "--gt", str(SYNTH / "gts"),
                 "--out", "{out}/eval_report"],
        "eval-bg": ["eval-bg", "--pred", str(SYNTH / "bg_preds"), "--out", "{out}/bg"],
        "curate": ["curate", "--detections", str(SYNTH / "detections.json"),
                   "--masks", str(SYNTH / "masks"), "--t-c", "0.3", "--reweight",
                   "--out", "{out}/manifest.json"],
        "sample": ["sample", "--pool", str(pool), "--k", "5", "--runs", "3",
                   "--seed", "42", "--out", "{out}"],
        "stats": ["stats", "--input", str(SYNTH / "registry.jsonl"), "--method", "hitnet",
                  "--k", "30", "--out", "{out}/stats"],
        "report": ["report", "--registry", str(SYNTH / "registry.jsonl"), "--out", "{out}/summary"],
        "inpaint emit-masks": ["inpaint", "emit-masks", "--tile", "64", "--out", "{out}"],
        "inpaint score": ["inpaint", "score", "--original", str(SYNTH / "preds" / "img_000.png"),
                          "--inpainted", str(SYNTH / "preds" / "img_001.png"), "--tile", "16",
                          "--out", "{out}/scores", "--heatmap-dir", "{out}/heat"],
    }
    for name, template in invocations.items():
        outputs = []
        for attempt in ("first", "second"):
            out_dir = tmp_path / name.replace(" ", "_") / attempt
            out_dir.mkdir(parents=True)
            argv = [arg.replace("{out}", str(out_dir)) for arg in template]
            assert cli_main(argv) == 0, name
            produced = sorted(p.relative_to(out_dir) for p in out_dir.rglob("*") if p.is_file())
            assert produced, name
            outputs.append((out_dir, produced))
        (dir_a, files_a), (dir_b, files_b) = outputs
        assert files_a == files_b, name
        for rel in files_a:
            assert (dir_a / rel).read_bytes() == (dir_b / rel).read_bytes(), f"{name}: {rel}"
    _pass(10, "all 8 subcommands are byte-identical across repeated invocations")
