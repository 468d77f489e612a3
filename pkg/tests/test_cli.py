from __future__ import annotations

import json

import numpy as np
import pytest

from codbench.cli import main

from conftest import blob_mask, write_gray_png


def make_eval_dirs(tmp_path, n=3, perfect=True):
    rng = np.random.default_rng(5)
    for i in range(n):
        gt = blob_mask(12, 12, 3, 3, 9, 9)
        write_gray_png(tmp_path / "gt" / f"img_{i}.png", gt * 255)
        if perfect:
            pred = gt * 255
        else:
            pred = np.rint(np.clip(gt + rng.normal(0, 0.3, gt.shape), 0, 1) * 255)
        write_gray_png(tmp_path / "pred" / f"img_{i}.png", pred)
    return tmp_path / "pred", tmp_path / "gt"


def write_detections(path, entries):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(entries))
    return path


class TestEval:
    def test_perfect_predictions(self, tmp_path, capsys):
        pred, gt = make_eval_dirs(tmp_path)
        out = tmp_path / "report"
        assert main(["eval", "--pred", str(pred), "--gt", str(gt), "--out", str(out)]) == 0
        data = json.loads((tmp_path / "report.json").read_text())
        for row in data["per_image"]:
            assert row["mae"] == 0.0
            assert row["s_measure"] == pytest.approx(1.0, abs=1e-5)
            assert row["e_phi"] == pytest.approx(1.0, abs=1e-3)
            assert row["f_beta_w"] == pytest.approx(1.0, abs=1e-5)
        assert (tmp_path / "report.csv").is_file()

    def test_unmatched_stems_warn_but_pass(self, tmp_path, capsys):
        pred, gt = make_eval_dirs(tmp_path)
        write_gray_png(pred / "extra.png", np.zeros((4, 4)))
        out = tmp_path / "r"
        assert main(["eval", "--pred", str(pred), "--gt", str(gt), "--out", str(out)]) == 0
        assert "extra" in capsys.readouterr().err
        data = json.loads((tmp_path / "r.json").read_text())
        assert len(data["per_image"]) == 3
        assert any("extra" in w for w in data["warnings"])

    def test_empty_intersection_fails(self, tmp_path, capsys):
        write_gray_png(tmp_path / "pred" / "a.png", np.zeros((4, 4)))
        write_gray_png(tmp_path / "gt" / "b.png", np.zeros((4, 4)))
        code = main(
            ["eval", "--pred", str(tmp_path / "pred"), "--gt", str(tmp_path / "gt"),
             "--out", str(tmp_path / "r")]
        )
        assert code == 1

    def test_config_echo_in_outputs(self, tmp_path):
        pred, gt = make_eval_dirs(tmp_path)
        main(["eval", "--pred", str(pred), "--gt", str(gt), "--out", str(tmp_path / "r"),
              "--seed", "9"])
        assert json.loads((tmp_path / "r.json").read_text())["config"]["seed"] == 9
        assert "# seed=9" in (tmp_path / "r.csv").read_text()


class TestEvalBg:
    def test_black_and_white(self, tmp_path):
        bg = tmp_path / "bg"
        write_gray_png(bg / "black.png", np.zeros((10, 10)))
        write_gray_png(bg / "white.png", np.full((10, 10), 255))
        assert main(["eval-bg", "--pred", str(bg), "--out", str(tmp_path / "b")]) == 0
        rows = {r["image_id"]: r for r in json.loads((tmp_path / "b.json").read_text())["per_image"]}
        assert rows["black"]["fpr"] == 0.0 and rows["black"]["tnr"] == 1.0
        assert rows["white"]["fpr"] == 1.0 and rows["white"]["tnr"] == 0.0


class TestCurate:
    def _fixture(self, tmp_path, confs=(0.1, 0.2, 0.5, 0.9)):
        entries = []
        for i, c in enumerate(confs):
            mask = blob_mask(10, 10, 0, 0, 2, 2)
            write_gray_png(tmp_path / "masks" / f"img_{i}.png", mask * 255)
            entries.append({"image_id": f"img_{i}", "confidence": c, "mask": f"img_{i}.png"})
        det = write_detections(tmp_path / "detections.json", entries)
        return det, tmp_path / "masks"

    def test_passthrough(self, tmp_path):
        det, masks = self._fixture(tmp_path)
        out = tmp_path / "manifest.json"
        assert main(["curate", "--detections", str(det), "--masks", str(masks),
                     "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert [e["weight"] for e in data["accepted"]] == [1.0] * 4
        assert data["rejected"] == []

    def test_threshold_and_reweight(self, tmp_path, capsys):
        det, masks = self._fixture(tmp_path)
        out = tmp_path / "manifest.json"
        code = main(["curate", "--detections", str(det), "--masks", str(masks),
                     "--t-c", "0.3", "--reweight", "--out", str(out)])
        assert code == 0
        data = json.loads(out.read_text())
        weights = {e["image_id"]: e["weight"] for e in data["accepted"]}
        assert weights == {"img_2": 0.0, "img_3": 1.0}
        assert {e["image_id"] for e in data["rejected"]} == {"img_0", "img_1"}
        assert "accepted=2 rejected=2" in capsys.readouterr().out

    def test_empty_s1_nonzero_exit(self, tmp_path, capsys):
        det, masks = self._fixture(tmp_path, confs=(0.1, 0.2))
        code = main(["curate", "--detections", str(det), "--masks", str(masks),
                     "--t-c", "0.9", "--out", str(tmp_path / "m.json")])
        assert code == 1
        assert "S1 is empty" in capsys.readouterr().err

    def test_toml_config_with_cli_override(self, tmp_path):
        det, masks = self._fixture(tmp_path)
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("t_c = 0.95\nreweight = true\n")
        out = tmp_path / "m.json"
        # TOML alone would reject everything; the command line wins.
        code = main(["curate", "--detections", str(det), "--masks", str(masks),
                     "--config", str(cfg), "--t-c", "0.3", "--out", str(out)])
        assert code == 0
        data = json.loads(out.read_text())
        assert len(data["accepted"]) == 2
        assert data["config"]["reweight"] is True  # from TOML


class TestSample:
    def test_deterministic_outputs(self, tmp_path):
        pool = tmp_path / "pool.txt"
        pool.write_text("\n".join(f"id_{i}" for i in range(40)))
        for sub in ("a", "b"):
            assert main(["sample", "--pool", str(pool), "--k", "5", "--runs", "3",
                         "--seed", "42", "--out", str(tmp_path / sub)]) == 0
        for name in ("k5_run1.txt", "k5_run2.txt", "k5_run3.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_split_then_sample(self, tmp_path):
        pool = tmp_path / "pool.txt"
        pool.write_text("\n".join(f"id_{i}" for i in range(100)))
        code = main(["sample", "--pool", str(pool), "--k", "10", "--runs", "2",
                     "--split", "0.48", "0.12", "0.40", "--out", str(tmp_path / "s")])
        assert code == 0
        train = (tmp_path / "s" / "split_train.txt").read_text().split()
        assert len(train) == 48
        sampled = (tmp_path / "s" / "k10_run1.txt").read_text().split()
        assert set(sampled) <= set(train)


class TestStats:
    def test_constant_series_zero_width(self, tmp_path):
        series = tmp_path / "series.txt"
        series.write_text("0.7\n0.7\n0.7\n")
        assert main(["stats", "--input", str(series), "--out", str(tmp_path / "st")]) == 0
        lines = (tmp_path / "st.csv").read_text().splitlines()
        last = lines[-1].split(",")
        assert last[0] == "3"
        assert last[2] == last[3] == "0.700000"

    def test_registry_input(self, tmp_path):
        registry = tmp_path / "registry.jsonl"
        rows = [
            {"method": "m", "k": 5, "run": r, "metrics": {"f_beta_w": 0.6 + 0.01 * r},
             "status": "ok"}
            for r in range(1, 4)
        ]
        registry.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        code = main(["stats", "--input", str(registry), "--method", "m", "--k", "5",
                     "--out", str(tmp_path / "st")])
        assert code == 0
        assert (tmp_path / "st.csv").read_text().count("\n") >= 4

    def test_registry_requires_method_and_k(self, tmp_path, capsys):
        registry = tmp_path / "registry.jsonl"
        registry.write_text("")
        assert main(["stats", "--input", str(registry), "--out", str(tmp_path / "x")]) == 1


class TestReport:
    def test_table_files(self, tmp_path):
        registry = tmp_path / "registry.jsonl"
        rows = []
        for k, mean in (("base", 0.564), (30, 0.734), (50, 0.753), ("full", 0.828)):
            rows.append({"method": "hitnet", "k": k, "run": 1,
                         "metrics": {"f_beta_w": mean}, "status": "ok"})
        registry.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        assert main(["report", "--registry", str(registry), "--out", str(tmp_path / "t")]) == 0
        csv_text = (tmp_path / "t.csv").read_text()
        assert "hitnet,50,1,0.753000,0.335106," in csv_text
        md = (tmp_path / "t.md").read_text()
        assert "| hitnet | 30 |" in md and "0.113527" in md


class TestInpaintCommands:
    def test_emit_masks_three_sizes(self, tmp_path, capsys):
        out = tmp_path / "masks"
        code = main(["inpaint", "emit-masks", "--tile", "128", "--tile", "64", "--tile", "32",
                     "--out", str(out)])
        assert code == 0
        assert len(list((out / "tiles_128").glob("*.png"))) == 16
        assert len(list((out / "tiles_64").glob("*.png"))) == 64
        assert len(list((out / "tiles_32").glob("*.png"))) == 256

    def test_score_identical_images(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (64, 64)).astype(np.uint8)
        a = write_gray_png(tmp_path / "orig.png", img)
        b = write_gray_png(tmp_path / "inp.png", img)
        code = main(["inpaint", "score", "--original", str(a), "--inpainted", str(b),
                     "--tile", "32", "--out", str(tmp_path / "scores"),
                     "--heatmap-dir", str(tmp_path / "heat")])
        assert code == 0
        lines = (tmp_path / "scores_tile32.csv").read_text().splitlines()
        data_lines = [l for l in lines if l and not l.startswith(("#", "row"))]
        assert all(l.endswith("1.000000,1.000000,1.000000") for l in data_lines)
        assert (tmp_path / "heat" / "heatmap_tile32_ssim.png").is_file()


class TestGlobalFlags:
    def test_workers_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("COD_BENCH_WORKERS", "2")
        pred, gt = make_eval_dirs(tmp_path)
        assert main(["eval", "--pred", str(pred), "--gt", str(gt),
                     "--out", str(tmp_path / "r")]) == 0
        assert json.loads((tmp_path / "r.json").read_text())["config"]["workers"] == 2

    def test_workers_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("COD_BENCH_WORKERS", "2")
        pred, gt = make_eval_dirs(tmp_path)
        main(["eval", "--pred", str(pred), "--gt", str(gt), "--out", str(tmp_path / "r"),
              "--workers", "3"])
        assert json.loads((tmp_path / "r.json").read_text())["config"]["workers"] == 3

    def test_bad_env_workers_is_an_error(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("COD_BENCH_WORKERS", "many")
        pred, gt = make_eval_dirs(tmp_path)
        assert main(["eval", "--pred", str(pred), "--gt", str(gt),
                     "--out", str(tmp_path / "r")]) == 1
        assert "COD_BENCH_WORKERS" in capsys.readouterr().err

    def test_invalid_threshold_rejected(self, tmp_path, capsys):
        pred, gt = make_eval_dirs(tmp_path)
        assert main(["eval", "--pred", str(pred), "--gt", str(gt),
                     "--out", str(tmp_path / "r"), "--binarize-threshold", "1.5"]) == 1

    def test_em_threshold_fixed(self, tmp_path):
        pred, gt = make_eval_dirs(tmp_path, perfect=False)
        main(["eval", "--pred", str(pred), "--gt", str(gt), "--out", str(tmp_path / "r"),
              "--em-threshold", "0.4"])
        assert json.loads((tmp_path / "r.json").read_text())["config"]["em_threshold"] == 0.4

    @pytest.mark.parametrize(
        "argv",
        [
            ["eval", "--help"],
            ["eval-bg", "--help"],
            ["curate", "--help"],
            ["sample", "--help"],
            ["stats", "--help"],
            ["report", "--help"],
            ["inpaint", "emit-masks", "--help"],
            ["inpaint", "score", "--help"],
        ],
    )
    def test_help_exits_zero(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 0
        assert "--help" in capsys.readouterr().out
