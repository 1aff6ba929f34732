"""The launcher scripts build valid configs and forward flags."""

import importlib.util
import json
import pathlib
import sys

import pytest

from coopd2d.config import build_config

SCRIPTS = pathlib.Path(__file__).resolve().parents[1] / "scripts"


def load(name):
    spec = importlib.util.spec_from_file_location(name, SCRIPTS / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def capture_runs(mod, monkeypatch):
    seen = []

    def fake(argv):
        i = argv.index("--config")
        with open(argv[i + 1]) as fh:
            seen.append((json.load(fh), argv))
        return 0

    monkeypatch.setattr(mod, "cli_main", fake)
    return seen


@pytest.mark.parametrize("name,count", [
    ("run_benchmark_tables", 3),
    ("run_rate_curves", 4),
    ("run_mobility_study", 1),
])
def test_script_emits_one_valid_config_per_experiment(
        name, count, monkeypatch, tmp_path):
    mod = load(name)
    seen = capture_runs(mod, monkeypatch)
    monkeypatch.setattr(sys, "argv",
                        [name, "--out", str(tmp_path), "--seed", "9",
                         "--threads", "2", "--quick"])
    assert mod.main() == 0
    assert len(seen) == count
    names = set()
    for raw, argv in seen:
        cfg, spec = build_config(raw)
        names.add(spec.name)
        assert spec.output_dir == str(tmp_path)
        assert argv[argv.index("--seed") + 1] == "9"
        assert argv[argv.index("--threads") + 1] == "2"
        assert cfg.training_samples <= 1000  # quick budget took
    assert len(names) == count


def test_mobility_script_forwards_speeds(monkeypatch, tmp_path):
    mod = load("run_mobility_study")
    seen = capture_runs(mod, monkeypatch)
    monkeypatch.setattr(sys, "argv",
                        ["x", "--out", str(tmp_path), "--speeds", "7", "12.5"])
    assert mod.main() == 0
    (raw, _), = seen
    _, spec = build_config(raw)
    assert spec.sweep["speeds"] == [7.0, 12.5]


def test_script_stops_on_first_failure(monkeypatch, tmp_path):
    mod = load("run_benchmark_tables")
    calls = []

    def fake(argv):
        calls.append(argv)
        return 2

    monkeypatch.setattr(mod, "cli_main", fake)
    monkeypatch.setattr(sys, "argv", ["x", "--out", str(tmp_path)])
    assert mod.main() == 2
    assert len(calls) == 1


def test_full_scale_defaults_keep_builtin_budget(monkeypatch, tmp_path):
    mod = load("run_rate_curves")
    seen = capture_runs(mod, monkeypatch)
    monkeypatch.setattr(sys, "argv", ["x", "--out", str(tmp_path)])
    assert mod.main() == 0
    for raw, _ in seen:
        cfg, spec = build_config(raw)
        assert cfg.training_samples == 10000
        assert spec.replications == 1000
