"""Command-line client: happy paths, determinism, and error reporting."""

import json

import numpy as np
import pytest
from click.testing import CliRunner
from conftest import build_corpus, tiny_config_dict
from scipy.io import wavfile

from gesturegen.cli import main
from gesturegen.condition import FeatureSequence, save_dimf


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, runner):
    """Prepared corpus + one trained run, shared by the read-only tests."""
    tmp = tmp_path_factory.mktemp("cli")
    bvh_dir, wav_dir = build_corpus(tmp)
    corpus = tmp / "corpus"
    result = runner.invoke(main, [
        "prepare", "--bvh-dir", str(bvh_dir), "--wav-dir", str(wav_dir),
        "--out", str(corpus), "--clip-s", "2.0"])
    assert result.exit_code == 0, result.output
    config_path = tmp / "config.json"
    config_path.write_text(json.dumps(tiny_config_dict()))
    run_dir = tmp / "run"
    result = runner.invoke(main, [
        "train", "--config", str(config_path), "--data-dir", str(corpus),
        "--out", str(run_dir)])
    assert result.exit_code == 0, result.output
    checkpoint = run_dir / "checkpoint_final.pt"
    assert checkpoint.exists()
    return {"tmp": tmp, "corpus": corpus, "config": config_path,
            "run": run_dir, "checkpoint": checkpoint}


class TestPrepare:
    def test_reports_clip_count(self, runner, tmp_path):
        bvh_dir, wav_dir = build_corpus(tmp_path)
        result = runner.invoke(main, [
            "prepare", "--bvh-dir", str(bvh_dir), "--wav-dir", str(wav_dir),
            "--out", str(tmp_path / "c"), "--clip-s", "2.0"])
        assert result.exit_code == 0
        assert "prepared 4 clips" in result.output

    def test_unpaired_warning_forwarded(self, runner, tmp_path):
        bvh_dir, wav_dir = build_corpus(tmp_path, extra_bvh="orphan")
        result = runner.invoke(main, [
            "prepare", "--bvh-dir", str(bvh_dir), "--wav-dir", str(wav_dir),
            "--out", str(tmp_path / "c"), "--clip-s", "2.0"])
        assert result.exit_code == 0
        assert "warning:" in result.output and "orphan" in result.output

    def test_parse_failure_is_error_line(self, runner, tmp_path):
        bvh_dir, wav_dir = build_corpus(tmp_path, stems=("alpha",))
        (bvh_dir / "alpha.bvh").write_text("HIERARCHY\nROOT Hips\n{\n")
        result = runner.invoke(main, [
            "prepare", "--bvh-dir", str(bvh_dir), "--wav-dir", str(wav_dir),
            "--out", str(tmp_path / "c"), "--clip-s", "2.0"])
        assert result.exit_code == 1
        assert "error: BvhParseError:" in result.output
        assert "alpha.bvh" in result.output


class TestTrain:
    def test_train_reports_run(self, runner, workspace):
        assert workspace["checkpoint"].exists()
        csv_path = workspace["run"] / "loss.csv"
        assert csv_path.exists()

    def test_same_seed_reproduces_loss_csv(self, runner, workspace, tmp_path):
        args = ["train", "--config", str(workspace["config"]),
                "--data-dir", str(workspace["corpus"])]
        result = runner.invoke(main, args + ["--out", str(tmp_path / "r1")])
        assert result.exit_code == 0, result.output
        result = runner.invoke(main, args + ["--out", str(tmp_path / "r2")])
        assert result.exit_code == 0, result.output
        first = (tmp_path / "r1" / "loss.csv").read_bytes()
        assert first == (tmp_path / "r2" / "loss.csv").read_bytes()
        assert first == (workspace["run"] / "loss.csv").read_bytes()

    def test_unknown_config_key_is_error_line(self, runner, workspace,
                                              tmp_path):
        bad = tiny_config_dict()
        bad["train"]["learning_rat"] = 1e-3
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        result = runner.invoke(main, [
            "train", "--config", str(path), "--data-dir",
            str(workspace["corpus"]), "--out", str(tmp_path / "r")])
        assert result.exit_code == 1
        assert "error: ConfigError:" in result.output
        assert "learning_rat" in result.output

    def test_unreadable_config_fails_client_side(self, runner, tmp_path):
        result = runner.invoke(main, [
            "train", "--config", str(tmp_path / "absent.json"),
            "--data-dir", "d", "--out", "o"])
        assert result.exit_code == 1
        assert "error: ConfigError:" in result.output


class TestSample:
    def test_same_seed_gives_identical_bvh(self, runner, workspace, tmp_path):
        wav_path = tmp_path / "cond.wav"
        wavfile.write(wav_path, 16000, np.zeros(32000, dtype=np.float32))
        for name in ("a.bvh", "b.bvh"):
            result = runner.invoke(main, [
                "sample", "--checkpoint", str(workspace["checkpoint"]),
                "--wav", str(wav_path), "--out", str(tmp_path / name),
                "--seed", "11"])
            assert result.exit_code == 0, result.output
            assert "wrote 40 frames at 20 fps" in result.output
        assert (tmp_path / "a.bvh").read_bytes() == \
            (tmp_path / "b.bvh").read_bytes()

    def test_resample_notice_on_mismatched_rate(self, runner, workspace,
                                                tmp_path):
        wav_path = tmp_path / "cond44.wav"
        wavfile.write(wav_path, 44100, np.zeros(88200, dtype=np.float32))
        result = runner.invoke(main, [
            "sample", "--checkpoint", str(workspace["checkpoint"]),
            "--wav", str(wav_path), "--out", str(tmp_path / "r.bvh")])
        assert result.exit_code == 0, result.output
        assert "notice: audio was resampled" in result.output

    def test_missing_checkpoint_is_error_line(self, runner, tmp_path):
        wav_path = tmp_path / "cond.wav"
        wavfile.write(wav_path, 16000, np.zeros(16000, dtype=np.float32))
        result = runner.invoke(main, [
            "sample", "--checkpoint", str(tmp_path / "absent.pt"),
            "--wav", str(wav_path), "--out", str(tmp_path / "x.bvh")])
        assert result.exit_code == 1
        assert "error: FileNotFoundError:" in result.output


class TestEval:
    def test_eval_prints_metrics_and_report(self, runner, workspace, tmp_path):
        clips = workspace["corpus"] / "clips"
        real_dir, gen_dir = tmp_path / "real", tmp_path / "gen"
        real_dir.mkdir()
        gen_dir.mkdir()
        for path in clips.glob("*.dimg"):
            (real_dir / path.name).write_bytes(path.read_bytes())
            (gen_dir / path.name).write_bytes(path.read_bytes())
        out_csv = tmp_path / "report.csv"
        result = runner.invoke(main, [
            "eval", "--real-dir", str(real_dir), "--gen-dir", str(gen_dir),
            "--wav-dir", str(clips), "--out-csv", str(out_csv),
            "--config", str(workspace["config"])])
        assert result.exit_code == 0, result.output
        assert "fgd_raw 0.0000" in result.output
        assert "beat_align" in result.output
        assert f"report: {out_csv}" in result.output
        assert out_csv.exists()


class TestBench:
    def test_bench_prints_scaling_table(self, runner, tmp_path):
        out_csv = tmp_path / "bench.csv"
        result = runner.invoke(main, [
            "bench", "--variant", "mamba2", "--lengths", "16,32",
            "--repeats", "1", "--no-sampling", "--out-csv", str(out_csv)])
        assert result.exit_code == 0, result.output
        assert "parameters" in result.output
        assert "L=   16" in result.output and "L=   32" in result.output
        assert out_csv.read_text().startswith("variant,length,parameters")

    def test_bad_lengths_rejected_client_side(self, runner):
        result = runner.invoke(main, [
            "bench", "--lengths", "16,banana", "--repeats", "1"])
        assert result.exit_code == 1
        assert "error: ConfigError:" in result.output


class TestExportFeatures:
    def test_check_validates_dimf(self, runner, tmp_path):
        feat = FeatureSequence(z_a=np.zeros((30, 80), dtype=np.float32),
                               frame_rate_hz=100.0, source="test")
        path = tmp_path / "f.dimf"
        save_dimf(path, feat)
        result = runner.invoke(main, ["export-features", "--check", str(path)])
        assert result.exit_code == 0, result.output
        assert "ok (30 frames x 80 channels at 100 Hz)" in result.output

    def test_bad_magic_is_error_line(self, runner, tmp_path):
        path = tmp_path / "bad.dimf"
        path.write_bytes(b"NOPE" + bytes(12))
        result = runner.invoke(main, ["export-features", "--check", str(path)])
        assert result.exit_code == 1
        assert "error: FormatError:" in result.output

    def test_without_check_points_to_exporter(self, runner):
        result = runner.invoke(main, ["export-features"])
        assert result.exit_code == 2
        assert "companion" in result.output
