import csv
import json
import math
import subprocess
import sys

import pytest

from coopd2d.cli import main
from coopd2d.experiments import ALGOS, EXPERIMENT_NAMES
from coopd2d.matching import InvariantViolation

FAST = {
    "m_count": 2, "n_count": 2, "training_samples": 60,
    "subframes_per_frame": 30, "replications": 2,
    "sweep": {"n_values": [2, 3], "eps_values": [0.5, 1.0],
              "sizes": [[2, 2]], "speeds": [5.0],
              "duration_s": 0.02, "bucket_s": 0.01},
}


def write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        return next(reader), list(reader)


def test_default_invocation_runs(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"m_count": 1, "n_count": 1,
                               "training_samples": 50,
                               "subframes_per_frame": 20})
    rc = main(["--config", cfg, "--out", str(tmp_path / "res")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "experiment: single-run" in out
    assert "(1 rows)" in out
    header, rows = read_rows(tmp_path / "res" / "single-run.csv")
    assert header == ["rep", "wsr", "outage_pct", "eau_cu", "eau_d2d",
                      "iterations"]
    assert len(rows) == 1


def test_single_run_reruns_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, {"m_count": 1, "n_count": 1,
                               "training_samples": 50,
                               "subframes_per_frame": 20, "seed": 3})
    assert main(["--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "single-run.csv").read_bytes()
    b = (tmp_path / "b" / "single-run.csv").read_bytes()
    assert a == b


def test_sumrate_emits_one_row_per_replication(tmp_path):
    payload = dict(FAST, experiment="sumrate-vs-n")
    payload["sweep"] = {"n_values": [5, 10]}
    payload.update(m_count=3, replications=2)
    cfg = write_cfg(tmp_path, payload)
    assert main(["--config", cfg, "--out", str(tmp_path / "res")]) == 0
    header, rows = read_rows(tmp_path / "res" / "sumrate-vs-n.csv")
    assert header == ["n", "algo", "mean_wsr", "stderr"]
    assert len(rows) == 16                     # 2 n * 4 algos * 2 reps
    assert [r[0] for r in rows[:8]] == ["5"] * 8
    assert [r[1] for r in rows[:2]] == ["dma", "dma"]
    # the last row of each group is the final estimate over both reps
    final = [r for r in rows if r[1] == "dma" and r[0] == "5"][-1]
    firsts = [float(r[2]) for r in rows if r[1] == "dma" and r[0] == "5"]
    assert float(final[2]) == pytest.approx(sum(firsts[:1] + [
        2 * firsts[1] - firsts[0]]) / 2)


@pytest.mark.parametrize("name", EXPERIMENT_NAMES)
def test_every_experiment_writes_parseable_csv(name, tmp_path):
    cfg = write_cfg(tmp_path, dict(FAST, experiment=name))
    out = tmp_path / "res"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    header, rows = read_rows(out / f"{name}.csv")
    assert header and rows
    labels = set(ALGOS) | {"two_timescale", "one_timescale", "cu", "d2d"}
    for row in rows:
        assert len(row) == len(header)
        for cell in row:
            if cell in labels:
                continue
            val = float(cell)                  # every other cell is numeric
            assert math.isfinite(val)


def test_threads_do_not_change_output(tmp_path):
    payload = dict(FAST, experiment="outage-vs-n")
    cfg = write_cfg(tmp_path, payload)
    assert main(["--config", cfg, "--out", str(tmp_path / "t1")]) == 0
    assert main(["--config", cfg, "--out", str(tmp_path / "t2"),
                 "--threads", "2"]) == 0
    a = (tmp_path / "t1" / "outage-vs-n.csv").read_bytes()
    b = (tmp_path / "t2" / "outage-vs-n.csv").read_bytes()
    assert a == b


def test_flag_overrides(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"m_count": 1, "n_count": 1,
                               "training_samples": 50,
                               "subframes_per_frame": 20})
    rc = main(["--config", cfg, "--experiment", "single-run",
               "--seed", "7", "--replications", "3",
               "--out", str(tmp_path / "o")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "seed: 7" in out
    assert "replications: 3" in out
    assert (tmp_path / "o" / "single-run.csv").exists()


def test_seed_changes_results(tmp_path):
    base = {"m_count": 1, "n_count": 1, "training_samples": 50,
            "subframes_per_frame": 20}
    cfg = write_cfg(tmp_path, base)
    assert main(["--config", cfg, "--seed", "1",
                 "--out", str(tmp_path / "s1")]) == 0
    assert main(["--config", cfg, "--seed", "2",
                 "--out", str(tmp_path / "s2")]) == 0
    a = (tmp_path / "s1" / "single-run.csv").read_bytes()
    b = (tmp_path / "s2" / "single-run.csv").read_bytes()
    assert a != b


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"eps": 0})
    assert main(["--config", cfg]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "nope.json")]) == 1
    assert "config error" in capsys.readouterr().err


def test_bad_threads_exit_code(capsys):
    assert main(["--threads", "0"]) == 1
    assert "--threads" in capsys.readouterr().err


def test_negative_seed_exit_code(capsys):
    assert main(["--seed", "-5"]) == 1
    assert "config error" in capsys.readouterr().err


def test_bad_replications_exit_code(capsys):
    assert main(["--replications", "0"]) == 1
    assert "config error" in capsys.readouterr().err


def test_unwritable_output_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_cfg(tmp_path, {"m_count": 1, "n_count": 1,
                               "training_samples": 50,
                               "subframes_per_frame": 20})
    rc = main(["--config", cfg, "--out", str(blocker / "sub")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_invariant_violation_exit_code(monkeypatch, capsys):
    def boom(spec, cfg, threads=1):
        raise InvariantViolation("stability check failed")

    monkeypatch.setattr("coopd2d.cli.run_experiment", boom)
    assert main([]) == 2
    assert "invariant violation" in capsys.readouterr().err


def test_unknown_experiment_rejected_by_parser(capsys):
    with pytest.raises(SystemExit):
        main(["--experiment", "bogus"])


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, {"m_count": 1, "n_count": 1,
                               "training_samples": 50,
                               "subframes_per_frame": 20})
    proc = subprocess.run(
        [sys.executable, "-m", "coopd2d", "--config", cfg,
         "--out", str(tmp_path / "res")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "single-run" in proc.stdout
