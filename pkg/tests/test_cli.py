"""End-to-end tests for the command-line interface."""

import csv
import json

import pytest

from rtp.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from rtp.ingest import read_observations
from rtp.preprocess import read_encoded


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A corpus plus every downstream artifact, produced via the CLI."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.csv"
    assert main(["--seed", "0", "synthesize", "--n", "120", "--out", str(corpus)]) == EXIT_OK

    train_config = root / "train.json"
    train_config.write_text(json.dumps({"max_epochs": 3, "early_stop_patience": 2}))

    for layout in ("a1", "b2"):
        assert (
            main(
                [
                    "--seed", "0",
                    "preprocess",
                    "--in", str(corpus),
                    "--layout", layout,
                    "--balance",
                    "--out", str(root / f"enc_{layout}.jsonl"),
                ]
            )
            == EXIT_OK
        )

    assert (
        main(
            [
                "--seed", "0",
                "train",
                "--variant", "a1",
                "--data", str(root / "enc_a1.jsonl"),
                "--config", str(train_config),
                "--out", str(root / "model_a1.json"),
            ]
        )
        == EXIT_OK
    )
    assert (
        main(
            [
                "--seed", "0",
                "train",
                "--variant", "b2",
                "--data", str(root / "enc_b2.jsonl"),
                "--config", str(train_config),
                "--stage1-model", str(root / "model_a1.json"),
                "--stage1-data", str(root / "enc_a1.jsonl"),
                "--out", str(root / "model_b2.json"),
            ]
        )
        == EXIT_OK
    )
    assert (
        main(
            [
                "compose",
                "--stage1", str(root / "model_a1.json"),
                "--stage2", str(root / "model_b2.json"),
                "--out", str(root / "twostage.json"),
            ]
        )
        == EXIT_OK
    )
    return root


class TestArtifacts:
    def test_corpus_parses(self, workdir):
        assert len(read_observations(workdir / "corpus.csv")) == 120

    def test_balanced_encodings_align(self, workdir):
        a1 = read_encoded(workdir / "enc_a1.jsonl")
        b2 = read_encoded(workdir / "enc_b2.jsonl")
        assert len(a1) == len(b2) > 0
        # Same seed and labels, so the balanced row order matches across layouts.
        assert [s.class_index for s in a1] == [s.class_index for s in b2]

    def test_augment(self, workdir, tmp_path):
        out = tmp_path / "augmented.csv"
        code = main(
            [
                "--seed", "1",
                "augment",
                "--in", str(workdir / "corpus.csv"),
                "--out", str(out),
                "--n", "40",
                "--change", "up",
            ]
        )
        assert code == EXIT_OK
        assert len(read_observations(out)) == 40

    def test_evaluate_classifier(self, workdir, tmp_path):
        report_path = tmp_path / "report.json"
        errors_path = tmp_path / "errors.csv"
        code = main(
            [
                "evaluate",
                "--model", str(workdir / "model_a1.json"),
                "--data", str(workdir / "corpus.csv"),
                "--out", str(report_path),
                "--errors", str(errors_path),
            ]
        )
        assert code == EXIT_OK
        report = json.loads(report_path.read_text())
        assert 0.0 <= report["classification"]["accuracy"] <= 1.0
        with open(errors_path) as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["row", "true_class", "predicted_class"]
        assert len(rows) == 121

    def test_evaluate_two_stage(self, workdir, tmp_path):
        report_path = tmp_path / "report.json"
        code = main(
            [
                "evaluate",
                "--model", str(workdir / "twostage.json"),
                "--data", str(workdir / "corpus.csv"),
                "--out", str(report_path),
            ]
        )
        assert code == EXIT_OK
        report = json.loads(report_path.read_text())
        assert "regression" in report
        assert report["regression"]["n_samples"] == 120

    def test_predict(self, workdir, tmp_path):
        out = tmp_path / "predictions.csv"
        code = main(
            [
                "predict",
                "--model", str(workdir / "twostage.json"),
                "--in", str(workdir / "corpus.csv"),
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        with open(out) as handle:
            rows = list(csv.reader(handle))
        assert rows[0][:2] == ["row", "prob_0"]
        assert len(rows) == 121
        probs = [float(v) for v in rows[1][1:6]]
        assert sum(probs) == pytest.approx(1.0, abs=1e-9)


class TestPipelineCommand:
    def test_pipeline_with_config_file(self, tmp_path):
        out_dir = tmp_path / "artifacts"
        config = tmp_path / "pipeline.json"
        config.write_text(
            json.dumps(
                {
                    "out_dir": str(out_dir),
                    "seed": 0,
                    "corpus_n": 300,
                    "augment_n": 150,
                    "classifier_ids": ["a1"],
                    "regressor_ids": ["b2"],
                    "compose_pair": ["a1", "b2"],
                    "training_overrides": {"max_epochs": 2},
                }
            )
        )
        assert main(["pipeline", "--config", str(config)]) == EXIT_OK
        report = json.loads((out_dir / "report.json").read_text())
        assert set(report["classifiers"]) == {"a1"}
        assert set(report["regressors"]) == {"b2"}
        assert (out_dir / "twostage.json").exists()
        assert (out_dir / "corpus.csv").exists()


class TestExitCodes:
    def test_unknown_layout_is_usage_error(self, workdir):
        code = main(
            [
                "preprocess",
                "--in", str(workdir / "corpus.csv"),
                "--layout", "q9",
                "--out", "/dev/null",
            ]
        )
        assert code == EXIT_USAGE

    def test_missing_required_flag_is_usage_error(self):
        assert main(["synthesize", "--n", "10"]) == EXIT_USAGE

    def test_missing_file_is_data_error(self, tmp_path):
        code = main(
            [
                "preprocess",
                "--in", str(tmp_path / "nope.csv"),
                "--layout", "a1",
                "--out", str(tmp_path / "out.jsonl"),
            ]
        )
        assert code == EXIT_DATA

    def test_malformed_csv_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("nope\n")
        code = main(
            [
                "preprocess",
                "--in", str(bad),
                "--layout", "a1",
                "--out", str(tmp_path / "out.jsonl"),
            ]
        )
        assert code == EXIT_DATA

    def test_regressor_without_stage1_is_usage_error(self, workdir):
        code = main(
            [
                "train",
                "--variant", "b2",
                "--data", str(workdir / "enc_b2.jsonl"),
                "--out", "/dev/null",
            ]
        )
        assert code == EXIT_USAGE


class TestSeedHandling:
    def test_env_seed_matches_flag(self, tmp_path, monkeypatch):
        by_flag = tmp_path / "flag.csv"
        by_env = tmp_path / "env.csv"
        main(["--seed", "5", "synthesize", "--n", "30", "--out", str(by_flag)])
        monkeypatch.setenv("RTP_SEED", "5")
        main(["synthesize", "--n", "30", "--out", str(by_env)])
        assert by_flag.read_bytes() == by_env.read_bytes()

    def test_flag_overrides_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RTP_SEED", "5")
        by_flag = tmp_path / "flag.csv"
        reference = tmp_path / "ref.csv"
        main(["--seed", "6", "synthesize", "--n", "30", "--out", str(by_flag)])
        monkeypatch.delenv("RTP_SEED")
        main(["--seed", "6", "synthesize", "--n", "30", "--out", str(reference)])
        assert by_flag.read_bytes() == reference.read_bytes()
