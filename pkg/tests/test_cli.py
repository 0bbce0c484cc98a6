"""End-to-end command-line flows and exit-code contract."""

import json
import subprocess
import sys

import numpy as np
import pytest

from offbeat.cli import main
from offbeat.data import Dataset, Session, load_dataset, save_dataset
from offbeat.evaluation import ExperimentReport, score, predict_dataset
from offbeat.model import load_model


def write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


SYNTH_CONFIG = {
    "gen": {
        "sessions": 3,
        "instances_per_session": [40, 60],
        "positive_rate": 0.15,
        "class_separation": 3.5,
        "seed": 0,
    },
    "noise": {"sigma": 0.6, "pi_pos": 0.9, "pi_neg": 0.02, "seed": 1},
}


@pytest.fixture()
def dataset_dir(tmp_path):
    config = write_json(tmp_path / "synth.json", SYNTH_CONFIG)
    out = tmp_path / "data"
    assert main(["synth", "--config", config, "--out", str(out)]) == 0
    return out


class TestSynth:
    def test_writes_sessions_and_manifest(self, dataset_dir, capsys):
        files = sorted(dataset_dir.glob("*.session"))
        assert len(files) == 3
        manifest = json.loads((dataset_dir / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["config"]["gen"]["sessions"] == 3
        assert manifest["config"]["noise"]["sigma"] == 0.6
        data = load_dataset(dataset_dir)
        assert data.has_labels
        assert len(data) == 3

    def test_byte_identical_across_runs(self, tmp_path):
        config = write_json(tmp_path / "synth.json", SYNTH_CONFIG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--config", config, "--out", str(a)]) == 0
        assert main(["synth", "--config", config, "--out", str(b)]) == 0
        for fa, fb in zip(sorted(a.glob("*.session")), sorted(b.glob("*.session"))):
            assert fa.read_bytes() == fb.read_bytes()

    def test_seed_flag_overrides_both_streams(self, tmp_path):
        config = write_json(tmp_path / "synth.json", SYNTH_CONFIG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--config", config, "--out", str(a)]) == 0
        assert main(["synth", "--config", config, "--out", str(b), "--seed", "9"]) == 0
        fa = sorted(a.glob("*.session"))[0]
        fb = sorted(b.glob("*.session"))[0]
        assert fa.read_bytes() != fb.read_bytes()
        manifest = json.loads((b / "manifest.json").read_text())
        assert manifest["config"]["gen"]["seed"] == 9
        assert manifest["config"]["noise"]["seed"] == 10

    def test_unknown_section_is_config_error(self, tmp_path, capsys):
        config = write_json(tmp_path / "bad.json", {"gen": {}, "extra": {}})
        assert main(["synth", "--config", config, "--out", str(tmp_path / "x")]) == 2
        assert "unknown sections" in capsys.readouterr().err

    def test_malformed_json_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"gen\": {,}\n}\n")
        assert main(["synth", "--config", str(path), "--out", str(tmp_path / "x")]) == 2
        assert "broken.json" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        missing = str(tmp_path / "absent.json")
        assert main(["synth", "--config", missing, "--out", str(tmp_path / "x")]) == 2


class TestTrain:
    def test_marginal_fit_writes_model_and_log(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "model.psi"
        code = main(["train", str(dataset_dir), "--method", "lrm", "--out", str(out)])
        assert code == 0
        model = load_model(out)
        assert model.classifier.kind == "logistic"
        log_lines = out.with_suffix(".log").read_text().splitlines()
        assert log_lines[0] == "method lrm"
        assert log_lines[1].startswith("wall_time ")
        assert log_lines[2].startswith("converged ")
        objectives = [float(l.split()[1]) for l in log_lines if l.startswith("objective ")]
        assert len(objectives) >= 2
        assert objectives == sorted(objectives)
        manifest = json.loads(out.with_suffix(".manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["config"]["method"]["name"] == "lrm"
        assert "model at" in capsys.readouterr().out

    def test_baseline_model_round_trips(self, dataset_dir, tmp_path):
        out = tmp_path / "naive.psi"
        assert main(["train", str(dataset_dir), "--method", "lrn", "--out", str(out)]) == 0
        model = load_model(out)
        # The classifier is the trained artifact; count/noise are the
        # defaults that make the format uniform.
        assert model.classifier.kind == "logistic"
        assert model.noise.num_components == 1

    def test_mi_logs_alternations(self, dataset_dir, tmp_path):
        out = tmp_path / "mi.psi"
        assert main(["train", str(dataset_dir), "--method", "mi", "--out", str(out)]) == 0
        text = out.with_suffix(".log").read_text()
        assert "alternations " in text

    def test_creates_missing_output_directory(self, dataset_dir, tmp_path):
        out = tmp_path / "runs" / "nested" / "lrn.psi"
        assert main(["train", str(dataset_dir), "--method", "lrn", "--out", str(out)]) == 0
        assert out.exists() and out.with_suffix(".log").exists()

    def test_dump_tables(self, dataset_dir, tmp_path):
        out = tmp_path / "model.psi"
        code = main(
            ["train", str(dataset_dir), "--method", "lrm", "--out", str(out),
             "--dump-tables"]
        )
        assert code == 0
        table_dir = tmp_path / "model.psi.tables"
        files = sorted(table_dir.glob("*.npz"))
        assert len(files) == 3
        data = load_dataset(dataset_dir)
        with np.load(files[0]) as tables:
            session = data[0]
            L, M = session.num_instances, session.num_events
            assert tables["log_a"].shape == (L + 1, M + 1)
            assert tables["log_b"].shape == (L + 2, M + 2)
            assert tables["label_posterior"].shape == (L,)
            assert tables["count_posterior"].shape == (L, 2, 2)
            assert tables["assignment_posterior"].shape == (L, M)
            assert np.isfinite(tables["log_marginal"])

    def test_dump_tables_noop_for_baselines(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "naive.psi"
        code = main(
            ["train", str(dataset_dir), "--method", "lrn", "--out", str(out),
             "--dump-tables"]
        )
        assert code == 0
        assert not (tmp_path / "naive.psi.tables").exists()
        assert "lrm/nnm only" in capsys.readouterr().err

    def test_method_config_conflict(self, dataset_dir, tmp_path, capsys):
        config = write_json(tmp_path / "spec.json", {"name": "mi"})
        code = main(
            ["train", str(dataset_dir), "--method", "lrm", "--config", config,
             "--out", str(tmp_path / "m.psi")]
        )
        assert code == 2
        assert "--method" in capsys.readouterr().err

    def test_missing_dataset_is_data_error(self, tmp_path):
        code = main(
            ["train", str(tmp_path / "nowhere"), "--method", "lrn",
             "--out", str(tmp_path / "m.psi")]
        )
        assert code == 3

    def test_supervised_needs_labels(self, tmp_path):
        rng = np.random.default_rng(0)
        bare = Session(
            "bare", np.arange(5.0), rng.normal(size=(5, 2)), np.array([1.0, 3.0])
        )
        save_dataset(Dataset((bare,)), tmp_path / "data")
        code = main(
            ["train", str(tmp_path / "data"), "--method", "supervised",
             "--out", str(tmp_path / "m.psi")]
        )
        assert code == 3

    def test_infeasible_dataset_is_numeric_error(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        crowded = Session(
            "crowded", np.array([0.0, 1.0]), rng.normal(size=(2, 2)),
            np.array([0.2, 0.5, 0.8]), np.array([1, 0]),
        )
        save_dataset(Dataset((crowded,)), tmp_path / "data")
        code = main(
            ["train", str(tmp_path / "data"), "--method", "lrm",
             "--out", str(tmp_path / "m.psi")]
        )
        assert code == 4
        assert "crowded" in capsys.readouterr().err


class TestEval:
    @pytest.fixture()
    def model_path(self, dataset_dir, tmp_path):
        out = tmp_path / "model.psi"
        assert main(["train", str(dataset_dir), "--method", "lrm", "--out", str(out)]) == 0
        return out

    def test_stdout_csv(self, dataset_dir, model_path, capsys):
        assert main(["eval", str(dataset_dir), str(model_path)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "session_id,instances,positives,precision,recall,f1"
        assert len(lines) == 1 + 3 + 1
        assert lines[-1].startswith("POOLED,")

    def test_pooled_row_matches_library_scoring(self, dataset_dir, model_path, capsys):
        assert main(["eval", str(dataset_dir), str(model_path)]) == 0
        pooled = capsys.readouterr().out.splitlines()[-1].split(",")
        data = load_dataset(dataset_dir)
        model = load_model(model_path)
        pred = predict_dataset(model.classifier, data, 0.5)
        truth = np.concatenate([s.true_labels for s in data])
        precision, recall, f1 = score(pred, truth)
        assert int(pooled[1]) == data.total_instances
        assert int(pooled[2]) == int(truth.sum())
        assert float(pooled[3]) == precision
        assert float(pooled[4]) == recall
        assert float(pooled[5]) == f1

    def test_out_file_and_manifest(self, dataset_dir, model_path, tmp_path, capsys):
        out = tmp_path / "metrics" / "metrics.csv"
        code = main(["eval", str(dataset_dir), str(model_path), "--out", str(out)])
        assert code == 0
        assert out.read_text().startswith("session_id,")
        manifest = json.loads(out.with_suffix(".manifest.json").read_text())
        assert manifest["command"] == "eval"
        assert manifest["config"]["threshold"] == 0.5

    def test_threshold_changes_predictions(self, dataset_dir, model_path, capsys):
        assert main(["eval", str(dataset_dir), str(model_path), "--threshold", "0.0"]) == 0
        pooled = capsys.readouterr().out.splitlines()[-1].split(",")
        # Threshold 0 labels everything positive: recall 1, precision = rate.
        assert float(pooled[4]) == 1.0
        assert float(pooled[3]) == int(pooled[2]) / int(pooled[1])

    def test_unlabeled_dataset_is_data_error(self, model_path, tmp_path):
        rng = np.random.default_rng(2)
        bare = Session("bare", np.arange(4.0), rng.normal(size=(4, 2)), np.array([]))
        save_dataset(Dataset((bare,)), tmp_path / "bare")
        assert main(["eval", str(tmp_path / "bare"), str(model_path)]) == 3

    def test_missing_model_is_data_error(self, dataset_dir, tmp_path):
        assert main(["eval", str(dataset_dir), str(tmp_path / "ghost.psi")]) == 3


class TestSweep:
    def test_explicit_config(self, tmp_path, capsys):
        config = write_json(
            tmp_path / "sweep.json",
            {
                "gen": {
                    "sessions": 4,
                    "instances_per_session": [25, 35],
                    "positive_rate": 0.15,
                    "class_separation": 3.5,
                },
                "sigmas": [0.5, 2.0],
                "methods": [{"name": "lrn"}],
                "folds": 2,
                "seeds": [0, 1],
            },
        )
        out = tmp_path / "report" / "report.csv"
        assert main(["sweep", "--config", config, "--out", str(out)]) == 0
        report = ExperimentReport.read_csv(out)
        # Per cell: 1 naive row + 2 folds; 4 cells.
        assert len(report) == 4 * 3
        captured = capsys.readouterr().out
        assert f"wrote {len(report)} rows" in captured
        assert "f1_vs_sigma.png" in captured
        assert (tmp_path / "report" / "f1_vs_sigma.png").exists()
        assert (tmp_path / "report" / "naive_label_quality.png").exists()
        manifest = json.loads(out.with_suffix(".manifest.json").read_text())
        assert manifest["config"]["sigmas"] == [0.5, 2.0]

    def test_preset_with_overrides(self, tmp_path):
        config = write_json(
            tmp_path / "preset.json",
            {
                "preset": "naive-quality",
                "gen": {
                    "sessions": 2,
                    "instances_per_session": [30, 40],
                    "positive_rate": 0.2,
                    "burst_length": 5.0,
                },
                "sigmas": [0.5, 2.0],
                "seeds": [0],
            },
        )
        out = tmp_path / "nq.csv"
        assert main(["sweep", "--config", config, "--out", str(out)]) == 0
        report = ExperimentReport.read_csv(out)
        assert len(report) == 2
        assert all(row.method == "naive_labels" for row in report.rows)

    def test_seed_flag_restricts_replicates(self, tmp_path):
        config = write_json(
            tmp_path / "preset.json",
            {
                "preset": "naive-quality",
                "gen": {"sessions": 2, "instances_per_session": [20, 25],
                        "positive_rate": 0.2, "burst_length": 5.0},
                "sigmas": [1.0, 2.0],
            },
        )
        out = tmp_path / "one.csv"
        assert main(["sweep", "--config", config, "--out", str(out), "--seed", "3"]) == 0
        report = ExperimentReport.read_csv(out)
        assert {row.seed for row in report.rows} == {3}

    def test_unknown_preset(self, tmp_path, capsys):
        config = write_json(tmp_path / "p.json", {"preset": "everything"})
        assert main(["sweep", "--config", config, "--out", str(tmp_path / "r.csv")]) == 2
        assert "unknown preset" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        config = write_json(tmp_path / "k.json", {"sigma": [1.0]})
        assert main(["sweep", "--config", config, "--out", str(tmp_path / "r.csv")]) == 2


class TestCheck:
    def test_quick_diagnostics_pass(self, capsys):
        assert main(["check", "--quick"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out
        assert "FAIL" not in out
        assert "checks passed" in out.splitlines()[-1]


class TestParser:
    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["train", "--method", "lrm"])  # missing dataset and --out
        assert excinfo.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.startswith("offbeat ")

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "offbeat", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("offbeat ")
