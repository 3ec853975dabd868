"""Command-line interface tests: dataset generation, training and
evaluation, annotation simulation with logs/checkpoints/replay, strategy
comparison, and error conduct (exit codes, messages)."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from irs.cli import main
from irs.dataset import load_features
from irs.regression import load_model


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def clean_manifest(tmp_path, capsys):
    """Zero-noise dataset: probe and gallery columns coincide exactly."""
    out = tmp_path / "clean.json"
    code, _, _ = run_cli(
        [
            "gen-synth", "--out", str(out), "--num-ids", "12", "--d", "10",
            "--noise", "0", "--shift", "0", "--seed", "1",
        ],
        capsys,
    )
    assert code == 0
    return out


@pytest.fixture
def noisy_manifest(tmp_path, capsys):
    out = tmp_path / "noisy.json"
    code, _, _ = run_cli(
        [
            "gen-synth", "--out", str(out), "--num-ids", "16", "--d", "12",
            "--noise", "0.3", "--shift", "0.5", "--seed", "2",
        ],
        capsys,
    )
    assert code == 0
    return out


class TestGenSynth:
    def test_writes_loadable_manifest(self, tmp_path, capsys):
        out = tmp_path / "synth.json"
        code, stdout, _ = run_cli(
            [
                "gen-synth", "--out", str(out), "--num-ids", "6", "--d", "5",
                "--imgs-per-id", "2", "--seed", "4",
            ],
            capsys,
        )
        assert code == 0
        report = json.loads(stdout)
        assert report["manifest"] == str(out)
        assert report["n"] == 6 * 2 * 2
        fm = load_features(out)
        assert fm.dim == 5
        assert fm.num_samples == 24

    def test_csv_format_round_trips(self, tmp_path, capsys):
        binary = tmp_path / "a.json"
        textual = tmp_path / "b.json"
        args = ["--num-ids", "5", "--d", "4", "--seed", "7"]
        assert run_cli(["gen-synth", "--out", str(binary), *args], capsys)[0] == 0
        assert (
            run_cli(
                ["gen-synth", "--out", str(textual), "--format", "csv", *args],
                capsys,
            )[0]
            == 0
        )
        a = load_features(binary)
        b = load_features(textual)
        assert np.array_equal(a.data, b.data)
        assert np.array_equal(a.ids, b.ids)


class TestTrainEvaluate:
    def test_zero_noise_rank1_is_perfect(self, clean_manifest, tmp_path, capsys):
        model_path = tmp_path / "model.bin"
        code, stdout, _ = run_cli(
            [
                "train", "--manifest", str(clean_manifest), "--ratio", "0.5",
                "--seed", "0", "--model-out", str(model_path),
            ],
            capsys,
        )
        assert code == 0
        report = json.loads(stdout)
        assert report["rank1"] == 1.0
        assert report["mAP"] == 1.0
        assert report["train_identities"] == 6
        assert report["test_identities"] == 6
        assert model_path.exists()
        assert load_model(model_path).kind == "linear"

    def test_fda_coding_matches_onehot(self, noisy_manifest, capsys):
        base = [
            "train", "--manifest", str(noisy_manifest), "--ratio", "0.5",
            "--seed", "3",
        ]
        _, out_onehot, _ = run_cli(base + ["--coding", "onehot"], capsys)
        _, out_fda, _ = run_cli(base + ["--coding", "fda"], capsys)
        # balanced classes: the two codings induce the same metric
        assert json.loads(out_onehot)["cmc"] == json.loads(out_fda)["cmc"]

    def test_evaluate_reproduces_train_report(self, noisy_manifest, tmp_path, capsys):
        model_path = tmp_path / "model.bin"
        args = ["--manifest", str(noisy_manifest), "--ratio", "0.5", "--seed", "5"]
        code, train_out, _ = run_cli(
            ["train", *args, "--model-out", str(model_path)], capsys
        )
        assert code == 0
        code, eval_out, _ = run_cli(
            ["evaluate", *args, "--model", str(model_path)], capsys
        )
        assert code == 0
        trained = json.loads(train_out)
        evaluated = json.loads(eval_out)
        assert evaluated["cmc"] == trained["cmc"]
        assert evaluated["mAP"] == trained["mAP"]

    def test_kernel_train_runs(self, noisy_manifest, capsys):
        code, stdout, _ = run_cli(
            [
                "train", "--manifest", str(noisy_manifest), "--ratio", "0.5",
                "--seed", "3", "--kernel", "rbf",
            ],
            capsys,
        )
        assert code == 0
        assert 0.0 <= json.loads(stdout)["rank1"] <= 1.0

    def test_missing_manifest_exits_2_and_names_path(self, tmp_path, capsys):
        missing = tmp_path / "absent.json"
        code, _, err = run_cli(["train", "--manifest", str(missing)], capsys)
        assert code == 2
        assert str(missing) in err

    def test_unknown_kernel_rejected(self, noisy_manifest, capsys):
        code, _, _ = run_cli(
            ["train", "--manifest", str(noisy_manifest), "--kernel", "quux"],
            capsys,
        )
        assert code == 2


def strip_volatile(record):
    return {k: v for k, v in record.items() if k != "update_ms"}


class TestSimulate:
    def simulate(self, manifest, out_dir, capsys, extra=()):
        return run_cli(
            [
                "simulate", "--manifest", str(manifest), "--ratio", "0.5",
                "--seed", "2", "--seed-identities", "3", "--budget", "5",
                "--out-dir", str(out_dir), *extra,
            ],
            capsys,
        )

    def test_log_checkpoint_and_report(self, noisy_manifest, tmp_path, capsys):
        out_dir = tmp_path / "run"
        code, stdout, _ = self.simulate(noisy_manifest, out_dir, capsys)
        assert code == 0
        report = json.loads(stdout)
        assert report["annotations"] == 5
        assert 0.0 <= report["mean_rank1"] <= 1.0

        records = [
            json.loads(line)
            for line in (out_dir / "session-log.jsonl").read_text().splitlines()
        ]
        assert records[0]["type"] == "header"
        annotations = [r for r in records if r["type"] == "annotation"]
        assert [r["step"] for r in annotations] == [1, 2, 3, 4, 5]
        assert records[-1]["type"] == "complete"
        assert (out_dir / "checkpoint.bin").exists()

    def test_deterministic_modulo_timing(self, noisy_manifest, tmp_path, capsys):
        code_a, out_a, _ = self.simulate(noisy_manifest, tmp_path / "a", capsys)
        code_b, out_b, _ = self.simulate(noisy_manifest, tmp_path / "b", capsys)
        assert code_a == code_b == 0
        read = lambda p: [
            strip_volatile(json.loads(line))
            for line in (p / "session-log.jsonl").read_text().splitlines()
        ]
        assert read(tmp_path / "a") == read(tmp_path / "b")
        assert (tmp_path / "a" / "checkpoint.bin").read_bytes() == (
            tmp_path / "b" / "checkpoint.bin"
        ).read_bytes()

    def test_replay_reproduces_checkpoint_bitwise(
        self, noisy_manifest, tmp_path, capsys
    ):
        live_dir = tmp_path / "live"
        assert self.simulate(noisy_manifest, live_dir, capsys)[0] == 0
        replay_dir = tmp_path / "replay"
        code, stdout, _ = run_cli(
            [
                "simulate", "--manifest", str(noisy_manifest),
                "--replay", str(live_dir / "session-log.jsonl"),
                "--out-dir", str(replay_dir),
            ],
            capsys,
        )
        assert code == 0
        report = json.loads(stdout)
        assert report["annotations"] == 5
        assert (replay_dir / "checkpoint.bin").read_bytes() == (
            live_dir / "checkpoint.bin"
        ).read_bytes()

    def test_replay_rejects_wrong_dataset(self, tmp_path, capsys, noisy_manifest):
        live_dir = tmp_path / "live"
        assert self.simulate(noisy_manifest, live_dir, capsys)[0] == 0
        other = tmp_path / "other.json"
        assert (
            run_cli(
                [
                    "gen-synth", "--out", str(other), "--num-ids", "16",
                    "--d", "11", "--seed", "2",
                ],
                capsys,
            )[0]
            == 0
        )
        code, _, err = run_cli(
            [
                "simulate", "--manifest", str(other),
                "--replay", str(live_dir / "session-log.jsonl"),
                "--out-dir", str(tmp_path / "r"),
            ],
            capsys,
        )
        assert code == 2
        assert "dataset" in err

    def test_compare_emits_row_per_strategy_per_checkpoint(
        self, noisy_manifest, tmp_path, capsys
    ):
        code, stdout, _ = run_cli(
            [
                "simulate", "--manifest", str(noisy_manifest), "--ratio", "0.5",
                "--seed", "3", "--seed-identities", "3",
                "--compare", "jointe2,random", "--budgets", "2,4",
            ],
            capsys,
        )
        assert code == 0
        rows = json.loads(stdout)["rows"]
        assert {(r["strategy"], r["budget"]) for r in rows} == {
            ("jointe2", 2), ("jointe2", 4), ("random", 2), ("random", 4),
        }
        for row in rows:
            assert 0.0 <= row["rank1"] <= 1.0

    def test_multi_seed_reports_per_seed_and_mean(
        self, noisy_manifest, tmp_path, capsys
    ):
        code, stdout, _ = run_cli(
            [
                "simulate", "--manifest", str(noisy_manifest), "--ratio", "0.5",
                "--seed", "1", "--seeds", "2", "--seed-identities", "3",
                "--budget", "3",
            ],
            capsys,
        )
        assert code == 0
        report = json.loads(stdout)
        assert len(report["per_seed"]) == 2
        assert report["mean_rank1"] == pytest.approx(
            float(np.mean([e["rank1"] for e in report["per_seed"]]))
        )


class TestEntryPoints:
    def test_module_help(self):
        proc = subprocess.run(
            [sys.executable, "-m", "irs.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "usage" in proc.stdout

    def test_console_script_help(self):
        proc = subprocess.run(["irs", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "gen-synth" in proc.stdout

    def test_serve_help(self, capsys):
        assert run_cli(["serve", "--help"], capsys)[0] == 0

    def test_no_command_shows_usage(self, capsys):
        code, _, err = run_cli([], capsys)
        assert code == 2
        assert "usage" in err
