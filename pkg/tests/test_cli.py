import json
import subprocess
import sys

import pytest
import yaml

from evshield.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_OUTPUT, main
from evshield.data import load_csv


@pytest.fixture
def config_file(tmp_path):
    raw = {
        "seed": 1,
        "output_dir": "out",
        "window_length": 6,
        "clients": [
            {"id": "a", "synthetic": {"base_level": 30, "daily_amplitude": 10, "weekly_amplitude": 3,
                                      "noise_std": 1.5, "length": 240}},
        ],
        "attack": {"min_separation": 6},
        "detector": {"max_epochs": 2, "batch_size": 16, "encoder_units": [6, 3], "decoder_units": [3, 6]},
        "federation": {"rounds": 1, "epochs_per_round": 1, "batch_size": 16, "lstm_units": 4, "dense_units": 3},
    }
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_generate(tmp_path, config_file, capsys):
    out = tmp_path / "gen"
    assert main(["generate", "-c", str(config_file), "-o", str(out)]) == EXIT_OK
    assert len(load_csv(out / "data" / "a.csv")) == 240


def test_build_scenarios_then_run_reusing_them(tmp_path, config_file, capsys):
    out = tmp_path / "o"
    assert main(["build-scenarios", "-c", str(config_file), "-o", str(out)]) == EXIT_OK
    assert (out / "scenarios" / "a" / "filtered.csv").exists()
    assert main(["run", "-c", str(config_file), "-o", str(out), "--scenarios", str(out)]) == EXIT_OK
    assert (out / "table1_performance.csv").exists()
    assert "fed_clean" in capsys.readouterr().out


def test_run_and_report(tmp_path, config_file):
    out = tmp_path / "run"
    assert main(["run", "-c", str(config_file), "-o", str(out), "--set", "federation.rounds=2"]) == EXIT_OK
    resolved = yaml.safe_load((out / "config.resolved.yaml").read_text())
    assert resolved["federation"]["rounds"] == 2
    assert len(json.loads((out / "history.json").read_text())["fed_clean"]) == 2
    again = tmp_path / "again"
    assert main(["report", str(out / "results.json"), "-o", str(again)]) == EXIT_OK
    for name in ("table1_performance.csv", "table2_detection.csv", "table3_per_client.csv"):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_relative_output_resolves_against_cwd(tmp_path, config_file, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["build-scenarios", "-c", str(config_file)]) == EXIT_OK
    assert (tmp_path / "out" / "scenarios" / "a").is_dir()


def test_exit_codes(tmp_path, config_file, capsys):
    assert main(["run", "-c", str(config_file), "--set", "federation.rounds=0"]) == EXIT_CONFIG
    assert main(["run", "-c", str(config_file), "--set", "oops"]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"clients": [{"id": "x", "csv": "nope.csv"}]}))
    assert main(["build-scenarios", "-c", str(bad), "-o", str(tmp_path / "b")]) == EXIT_DATA
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", "-c", str(config_file), "-o", str(blocker / "x")]) == EXIT_OUTPUT
    assert main(["report", str(tmp_path / "missing.json"), "-o", str(tmp_path / "r")]) == EXIT_DATA
    err = capsys.readouterr().err
    assert "config error" in err and "output error" in err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "evshield", "--help"], capture_output=True, text=True)
    assert done.returncode == 0
    assert "build-scenarios" in done.stdout
