import subprocess
from pathlib import Path

import pytest

from egofuse.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    main,
)
from egofuse.manifest import load_manifest

from conftest import build_mini_corpus


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_corpus")
    build_mini_corpus(root)
    return root


@pytest.fixture(scope="module")
def cli_config(cli_corpus, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("cli_out")
    cfg = tmp_path_factory.mktemp("cli_cfg") / "exp.cfg"
    cfg.write_text(
        f"manifest = {cli_corpus / 'manifest.tsv'}\n"
        f"out_dir = {out_dir}\n"
        "channels = GOFF, VIF\n"
        "classifier = svm_poly\n"
        "trials = 2\n"
        "seed = 0\n"
    )
    return cfg, out_dir


class TestSynthCommand:
    def test_generates_loadable_corpus(self, tmp_path, capsys):
        assert main(["synth", "--seed", "3", "--out", str(tmp_path / "c")]) == EXIT_OK
        manifest = load_manifest(tmp_path / "c" / "manifest.tsv")
        assert manifest.n_classes == 4
        assert len(manifest.segments) == 48
        out = capsys.readouterr().out
        assert "48 segments" in out


class TestExtractAndRun:
    def test_extract_then_run(self, cli_config, capsys):
        cfg, out_dir = cli_config
        assert main(["extract", "--config", str(cfg)]) == EXIT_OK
        assert (out_dir / "features.egf").exists()
        assert main(["run", "--config", str(cfg)]) == EXIT_OK
        captured = capsys.readouterr().out
        assert "svm_poly" in captured
        assert (out_dir / "comparison.csv").exists()
        assert (out_dir / "results.json").exists()
        header = (out_dir / "comparison.csv").read_text().splitlines()[0]
        assert header == "classifier,A,P,R,kappa,SIC,F"

    def test_classifier_override(self, cli_config, capsys):
        cfg, out_dir = cli_config
        assert main(["run", "--config", str(cfg), "--classifier", "mkboost"]) == EXIT_OK
        assert "mkboost" in capsys.readouterr().out
        assert (out_dir / "confusion_mkboost.txt").exists()

    def test_report_rerenders(self, cli_config, tmp_path, capsys):
        cfg, out_dir = cli_config
        dest = tmp_path / "rendered"
        assert main(["report", "--in", str(out_dir), "--out", str(dest)]) == EXIT_OK
        assert (dest / "comparison.csv").exists()

    def test_report_without_results_is_data_error(self, tmp_path, capsys):
        assert main(["report", "--in", str(tmp_path)]) == EXIT_DATA
        assert "results.json" in capsys.readouterr().err


class TestErrorPaths:
    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("manifest = m.tsv\nwhatever = 1\n")
        assert main(["extract", "--config", str(cfg)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["extract", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG

    def test_missing_manifest_is_data_error(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(f"manifest = {tmp_path / 'missing.tsv'}\n")
        assert main(["extract", "--config", str(cfg)]) == EXIT_DATA
        assert "data error" in capsys.readouterr().err

    def test_bad_classifier_flag_rejected_by_parser(self, cli_config):
        cfg, _ = cli_config
        with pytest.raises(SystemExit) as err:
            main(["run", "--config", str(cfg), "--classifier", "nope"])
        assert err.value.code == 2


class TestInstalledEntryPoint:
    def test_console_script_help(self):
        proc = subprocess.run(
            ["egofuse", "--help"], capture_output=True, text=True, timeout=60
        )
        assert proc.returncode == 0
        assert "extract" in proc.stdout and "synth" in proc.stdout
