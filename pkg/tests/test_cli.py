import json
import os
import subprocess
import sys

import numpy as np
import pytest

from upqeval import SceneSpec, generate_scene
from upqeval.cli import main
from upqeval.io_formats import load_report, save_panoptic_compact

from conftest import raster


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert run("synth", out, "--seed", 11, "--count", 4, "--width", 48,
               "--height", 48, "--mark-errors-difficult") == 0
    return out / "manifest.json"


class TestEvaluate:
    def test_pq_report(self, dataset, tmp_path, capsys):
        out = tmp_path / "pq.json"
        assert run("evaluate", dataset, "--metric", "pq", "--out", out) == 0
        rep = load_report(out)
        assert rep["metric"] == "pq"
        assert rep["n_samples"] == 4
        agg = rep["overall"]["aggregates"]["all"]
        assert 0.0 <= agg["pq"] <= 1.0
        assert set(rep["overall"]["per_class"])  # at least one class present

    def test_pq_to_stdout(self, dataset, capsys):
        assert run("evaluate", dataset) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["metric"] == "pq"

    def test_upq_with_oracle_confidence_beats_constant(self, dataset, tmp_path):
        a, b = tmp_path / "oracle.json", tmp_path / "const.json"
        assert run("evaluate", dataset, "--metric", "upq",
                   "--baseline", "oracle", "--out", a) == 0
        assert run("evaluate", dataset, "--metric", "upq",
                   "--baseline", "constant:1.0", "--out", b) == 0
        upq_oracle = load_report(a)["overall"]["aggregates"]["all"]["upq"]
        upq_const = load_report(b)["overall"]["aggregates"]["all"]["upq"]
        # errors are all marked difficult, so the oracle can only help
        assert upq_oracle >= upq_const

    def test_aupq_with_csv_and_figures(self, dataset, tmp_path):
        out, csv, figs = tmp_path / "r.json", tmp_path / "r.csv", tmp_path / "figs"
        assert run("evaluate", dataset, "--metric", "aupq", "--grid-size", 4,
                   "--out", out, "--csv", csv, "--figures", figs) == 0
        rep = load_report(out)
        mat = np.asarray(rep["overall"]["matrices"]["upq_all"])
        assert mat.shape == (4, 4)
        # cells are serialized at 6 decimals, so the means only agree to ~1e-6
        assert rep["overall"]["aupq"]["all"] == pytest.approx(
            float(np.mean(mat)), abs=2e-6)
        assert csv.exists() and csv.read_text().count("\n") > 1
        pngs = list(figs.glob("*.png"))
        assert pngs, "figure rendering produced no files"

    def test_miou(self, dataset, tmp_path):
        out = tmp_path / "miou.json"
        assert run("evaluate", dataset, "--metric", "miou", "--out", out) == 0
        rep = load_report(out)
        assert 0.0 <= rep["overall"]["miou"] <= 1.0

    def test_per_image_mean_aggregation(self, dataset, tmp_path):
        out = tmp_path / "pim.json"
        assert run("evaluate", dataset, "--aggregation", "per-image-mean",
                   "--out", out) == 0
        agg = load_report(out)["overall"]["aggregates"]["all"]
        assert agg["n_images"] == 4


class TestDeterminism:
    def test_worker_count_does_not_change_report_bytes(self, dataset, tmp_path):
        a, b = tmp_path / "w1.json", tmp_path / "w8.json"
        assert run("evaluate", dataset, "--metric", "aupq", "--grid-size", 6,
                   "--workers", 1, "--out", a) == 0
        assert run("evaluate", dataset, "--metric", "aupq", "--grid-size", 6,
                   "--workers", 8, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_workers_env_variable(self, dataset, tmp_path):
        out = tmp_path / "env.json"
        env = dict(os.environ, UPQEVAL_WORKERS="3")
        proc = subprocess.run(
            [sys.executable, "-m", "upqeval", "evaluate", str(dataset),
             "--metric", "pq", "--out", str(out)],
            env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert load_report(out)["n_samples"] == 4

    def test_repeated_runs_byte_identical(self, dataset, tmp_path):
        a, b = tmp_path / "r1.json", tmp_path / "r2.json"
        for p in (a, b):
            assert run("evaluate", dataset, "--metric", "upq",
                       "--baseline", "oracle", "--out", p) == 0
        assert a.read_bytes() == b.read_bytes()


class TestExitCodes:
    def test_missing_manifest_is_input_error(self, tmp_path):
        assert run("evaluate", tmp_path / "nope.json") == 2

    def test_garbage_manifest_is_input_error(self, tmp_path):
        p = tmp_path / "manifest.json"
        p.write_text("{broken")
        assert run("evaluate", p) == 2

    def test_unknown_condition_is_validation_error(self, dataset):
        assert run("evaluate", dataset, "--condition", "dusk") == 3

    def test_upq_without_confidence_or_difficulty(self, tmp_path):
        # manifest whose sample lacks difficulty: upq must fail cleanly
        scene = generate_scene(SceneSpec(seed=1, width=16, height=16))
        save_panoptic_compact(scene.pred, tmp_path / "p.png")
        save_panoptic_compact(scene.gt, tmp_path / "g.png")
        (tmp_path / "manifest.json").write_text(json.dumps({
            "schema_version": 1,
            "samples": [{"sample_id": "a", "prediction": "p.png",
                         "ground_truth": "g.png"}],
        }))
        assert run("evaluate", tmp_path / "manifest.json", "--metric", "upq",
                   "--baseline", "constant:1.0") == 3

    def test_report_diff_tolerance(self, dataset, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("evaluate", dataset, "--out", a) == 0
        assert run("evaluate", dataset, "--out", b) == 0
        assert run("report-diff", a, b) == 0
        payload = load_report(b)
        payload["overall"]["aggregates"]["all"]["pq"] += 0.01
        b.write_text(json.dumps(payload))
        assert run("report-diff", a, b) == 3

    def test_report_diff_structure_mismatch(self, dataset, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("evaluate", dataset, "--out", a) == 0
        assert run("evaluate", dataset, "--metric", "miou", "--out", b) == 0
        assert run("report-diff", a, b) == 3


class TestDeriveDifficulty:
    def _stage_dirs(self, tmp_path):
        h1d, h2d = tmp_path / "h1", tmp_path / "h2"
        h1d.mkdir()
        h2d.mkdir()
        h1 = raster([[13] * 4], [[1, 1, 2, 2]])
        h2 = raster([[13, 13, 13, 0]], [[5, 5, 6, 0]])
        save_panoptic_compact(h1, h1d / "img.png")
        save_panoptic_compact(h2, h2d / "img.png")
        return h1d, h2d

    def test_derives_expected_map(self, tmp_path, capsys):
        from upqeval.io_formats import load_difficulty
        h1d, h2d = self._stage_dirs(tmp_path)
        outd = tmp_path / "out"
        assert run("derive-difficulty", h1d, h2d, outd) == 0
        d = load_difficulty(outd / "img.png").values[0]
        # (1,5) and (2,6) pair up; the last pixel changed class entirely
        assert d.tolist() == [0, 0, 0, 2]

    def test_missing_counterpart(self, tmp_path):
        h1d, h2d = self._stage_dirs(tmp_path)
        (h2d / "img.png").unlink()
        assert run("derive-difficulty", h1d, h2d, tmp_path / "out") == 3

    def test_empty_input_dir(self, tmp_path):
        (tmp_path / "h1").mkdir()
        (tmp_path / "h2").mkdir()
        assert run("derive-difficulty", tmp_path / "h1", tmp_path / "h2",
                   tmp_path / "out") == 2


class TestSelfcheck:
    def test_small_run_passes(self, capsys):
        assert run("selfcheck", "--scenes", 5, "--seed", 3) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 2
