"""CLI verb tests: artifacts, determinism, error paths, round-trips."""

import json
from pathlib import Path

import pytest

from precourse.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def trained_tiny(tmp_path_factory):
    """Train once for the whole module; several verbs consume the artifacts."""
    out = tmp_path_factory.mktemp("artifacts") / "tiny"
    code = run_cli("train", "--config", "tiny", "--out", str(out),
                   "--seed", "3", "--train-states", "12", "--epochs", "2")
    assert code == 0
    return out


class TestTrain:
    def test_writes_policy_log_and_config(self, trained_tiny):
        assert (trained_tiny / "policy.json").exists()
        assert (trained_tiny / "training_log.csv").exists()
        assert (trained_tiny / "config.yaml").exists()
        blob = json.loads((trained_tiny / "policy.json").read_text())
        assert "schema_hash" in blob and blob["params"]["w1"]
        log = (trained_tiny / "training_log.csv").read_text().splitlines()
        assert log[0] == "epoch,loss,validity"
        assert len(log) == 3  # header + 2 epochs

    def test_bad_config_exits_nonzero(self, capsys):
        assert run_cli("train", "--config", "no_such_dataset",
                       "--out", "/tmp/x") == 1
        assert "error:" in capsys.readouterr().err


class TestExtractEfare:
    def test_without_model_artifact_fails(self, tmp_path, capsys):
        code = run_cli("extract-efare", "--config", "tiny",
                       "--out", str(tmp_path / "empty"))
        assert code == 1
        assert "model artifact not found" in capsys.readouterr().err

    def test_builds_automaton_from_trained_policy(self, trained_tiny):
        code = run_cli("extract-efare", "--config", "tiny",
                       "--out", str(trained_tiny), "--seed", "4",
                       "--traces", "30", "--trace-states", "20")
        assert code == 0
        blob = json.loads((trained_tiny / "automaton.json").read_text())
        assert "START" in blob["nodes"]


class TestSimulateEvaluate:
    def _eval_args(self, out, transcripts=None):
        args = ["evaluate", "--config", "tiny", "--out", str(out), "--seed", "5",
                "--users", "3", "--q-grid", "0,2", "--k-grid", "2",
                "--models", "noiseless", "--generator", "exhaustive",
                "--oracle-t-max", "3"]
        if transcripts:
            args += ["--transcripts", str(transcripts)]
        return args

    def test_evaluate_deterministic_csvs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(*self._eval_args(a)) == 0
        assert run_cli(*self._eval_args(b)) == 0
        for name in ("curves.csv", "summary.csv", "errors.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_simulate_transcripts_replayable_by_evaluate(self, tmp_path):
        sim_out = tmp_path / "sim"
        code = run_cli("simulate", "--config", "tiny", "--out", str(sim_out),
                       "--seed", "5", "--users", "3", "--q-grid", "0,2",
                       "--k-grid", "2", "--models", "noiseless",
                       "--generator", "exhaustive", "--oracle-t-max", "3")
        assert code == 0
        transcripts = sim_out / "transcripts.json"
        assert transcripts.exists()

        fresh, replayed = tmp_path / "fresh", tmp_path / "replayed"
        assert run_cli(*self._eval_args(fresh)) == 0
        assert run_cli(*self._eval_args(replayed, transcripts=transcripts)) == 0
        for name in ("curves.csv", "summary.csv", "errors.csv"):
            assert (fresh / name).read_bytes() == (replayed / name).read_bytes()

    def test_no_partial_outputs_on_failure(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli("evaluate", "--config", "tiny", "--out", str(out),
                       "--generator", "wefare")  # no artifacts -> must fail
        assert code == 1
        assert "automaton" in capsys.readouterr().err
        assert not list(out.glob("*.csv")) if out.exists() else True


class TestServeParser:
    def test_parser_accepts_serve_flags(self):
        from precourse.cli import build_parser

        args = build_parser().parse_args(
            ["serve", "--artifacts", "/tmp/a", "--db", "/tmp/d.sqlite",
             "--bind", "127.0.0.1:9001"])
        assert args.bind == "127.0.0.1:9001"
