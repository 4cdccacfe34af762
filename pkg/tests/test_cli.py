import csv
import os
import subprocess
import sys

import pytest

from fdisac.cli import RESULT_FIELDS, build_tasks, main, parse_modes, parse_sweep, run_experiment
from fdisac.scenario import ScenarioConfig


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_sweep_and_modes():
    s = parse_sweep(["m=4,8", "gamma_db=0,5.5"])
    assert s == {"n_ris": [4, 8], "radar_threshold_db": [0.0, 5.5]}
    assert parse_modes("full, noris") == ["full", "noris"]
    for bad in (["m"], ["zz=1"], ["m=a"], ["m="]):
        with pytest.raises(ValueError):
            parse_sweep(bad)
    with pytest.raises(ValueError):
        parse_modes("full,bogus")


def test_channels_shared_across_cells():
    tasks = build_tasks(ScenarioConfig(), {"n_ris": [4, 8]}, ["full", "noris"], 2, 7, {})
    assert len(tasks) == 8
    by_seed = {}
    for t in tasks:
        by_seed.setdefault(t.seed, set()).add(t.channel_seed)
    assert all(len(v) == 1 for v in by_seed.values())
    assert tasks[0].channel_seed != tasks[1].channel_seed


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["--sweep", "m=4", "--sweep", "gamma_db=0,40", "--seeds", "2", "--mode", "full,noris",
                 "--max-outer", "3", "--out", str(out)])
    return code, out


def test_outputs(small_run):
    code, out = small_run
    assert code == 0
    rows = read_csv(out / "results.csv")
    assert len(rows) == 8
    assert list(rows[0]) == RESULT_FIELDS
    for name in ("summary.csv", "iterations.csv", "run_config.json"):
        assert (out / name).exists()
    assert len(os.listdir(out / "traces")) == sum(r["sum_rate"] != "" for r in rows)


def test_infeasible_cells_flagged(small_run):
    _, out = small_run
    rows = read_csv(out / "results.csv")
    high = [r for r in rows if float(r["gamma_r_db"]) == 40.0]
    assert high and all(r["status"].startswith("infeasible") and r["sum_rate"] == "" for r in high)
    low = [r for r in rows if float(r["gamma_r_db"]) == 0.0]
    assert all(r["status"] in ("converged", "max_outer") for r in low)


def test_deterministic(tmp_path):
    args = dict(config_path=None, sweep_spec=["m=4"], n_seeds=2, master_seed=3,
                run_options={"max_outer": 2})
    run_experiment(out_dir=str(tmp_path / "a"), **args)
    run_experiment(out_dir=str(tmp_path / "b"), **args)
    a, b = read_csv(tmp_path / "a" / "results.csv"), read_csv(tmp_path / "b" / "results.csv")
    for ra, rb in zip(a, b):
        ra.pop("wall_ms"), rb.pop("wall_ms")
        assert ra == rb


def test_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("scenario:\n  n_ris: 4\n  n_users: 1\nrun:\n  max_outer: 2\n")
    assert main(["--config", str(cfg), "--seeds", "1", "--out", str(tmp_path / "o")]) == 0
    row = read_csv(tmp_path / "o" / "results.csv")[0]
    assert row["M"] == "4" and row["K"] == "1" and int(row["outer_iters"]) <= 2
    cfg.write_text("scenario:\n  n_ris: 4\nrun:\n  nonsense: 1\n")
    assert main(["--config", str(cfg), "--seeds", "1", "--out", str(tmp_path / "p")]) == 2


def test_bad_arguments(capsys, tmp_path):
    assert main(["--sweep", "q=1", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["--seeds", "0", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fdisac", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--sweep" in proc.stdout
