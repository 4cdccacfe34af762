"""Monte-Carlo experiment runner.

Example::

    fdisac --sweep m=16,32,64 --sweep gamma_db=0,5,10 --seeds 20 \\
           --mode full,rndris,noris --out results/

Every (sweep cell, mode, seed) triple is one run. Outputs in ``--out``:

* ``results.csv``  one row per run (schema in :data:`RESULT_FIELDS`)
* ``summary.csv``  mean/std of the sum-rate per cell, ready to plot
* ``iterations.csv``  per-iteration sum-rate and radar SINR of every run
* ``traces/``  one JSON report per run
"""

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from .beamformer import AdmmConfig
from .orchestrator import MODES, InfeasibleScenarioError, RunOptions, run
from .ris_pdd import PddConfig
from .scenario import ScenarioConfig, generate_channels, load_config

logger = logging.getLogger("fdisac")

RESULT_FIELDS = ["cell_id", "seed", "mode", "M", "Nt", "Nr", "K", "gamma_r_db", "si_db",
                 "sum_rate", "sinr_radar_db", "outer_iters", "wall_ms", "status"]

SWEEP_KEYS = {
    "m": ("n_ris", int),
    "nt": ("n_tx", int),
    "nr": ("n_rx", int),
    "k": ("n_users", int),
    "gamma_db": ("radar_threshold_db", float),
    "si_db": ("si_path_loss_db", float),
    "pbs_dbm": ("bs_power_dbm", float),
    "pu_dbm": ("user_power_dbm", float),
}

RUN_KEYS = {"stop_tol", "max_outer"}


def parse_sweep(items):
    """``["m=16,32", "gamma_db=0,5"]`` -> ordered ``{field: [values]}``."""
    out = {}
    for item in items or []:
        key, sep, values = item.partition("=")
        key = key.strip().lower()
        if not sep or key not in SWEEP_KEYS:
            raise ValueError(f"bad --sweep {item!r}; expected KEY=V1,V2 with KEY in {sorted(SWEEP_KEYS)}")
        field, cast = SWEEP_KEYS[key]
        try:
            out[field] = [cast(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise ValueError(f"bad value list in --sweep {item!r}") from None
        if not out[field]:
            raise ValueError(f"--sweep {item!r} has no values")
    return out


def parse_modes(text):
    modes = [m.strip().lower() for m in text.split(",") if m.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        raise ValueError(f"--mode must be a comma list from {MODES}, got {text!r}")
    return modes


@dataclass(frozen=True)
class Task:
    cell_id: int
    seed: int
    mode: str
    scenario: dict
    options: dict
    channel_seed: int
    init_seed: int
    trace_dir: str = None


def stream_seed(*key):
    """Independent 32-bit seed for a tuple of non-negative integers."""
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def build_tasks(base, sweep, modes, n_seeds, master_seed, options, trace_dir=None):
    """Cartesian product of sweep values x modes x seeds, in a fixed order.

    Channels depend on (master seed, seed) only, so every cell sees the same
    geometry and fading draw for a given seed.
    """
    fields = list(sweep)
    grid = list(itertools.product(*(sweep[f] for f in fields))) if fields else [()]
    tasks = []
    cell = 0
    for values in grid:
        scen = base.replace(**dict(zip(fields, values))).to_dict()
        for mode in modes:
            for seed in range(n_seeds):
                tasks.append(Task(cell, seed, mode, scen, dict(options, mode=mode),
                                  stream_seed(master_seed, seed), stream_seed(master_seed, cell, seed),
                                  trace_dir))
            cell += 1
    return tasks


def _options(d):
    d = dict(d)
    pdd = PddConfig(**d.pop("pdd", {}))
    admm = AdmmConfig(**d.pop("admm", {}))
    return RunOptions(pdd=pdd, admm=admm, **d)


def execute(task):
    """Run one task; returns ``(row, iteration_rows)``. Never raises on infeasibility."""
    cfg = ScenarioConfig.from_dict(task.scenario)
    row = {"cell_id": task.cell_id, "seed": task.seed, "mode": task.mode, "M": cfg.n_ris,
           "Nt": cfg.n_tx, "Nr": cfg.n_rx, "K": cfg.n_users,
           "gamma_r_db": cfg.radar_threshold_db, "si_db": cfg.si_path_loss_db}
    ch = generate_channels(cfg, task.channel_seed)
    t0 = time.perf_counter()
    iters = []
    try:
        rep = run(ch, _options(task.options), seed=task.init_seed)
    except InfeasibleScenarioError as exc:
        row.update(sum_rate="", sinr_radar_db="", outer_iters=0, status=f"infeasible: {exc}")
    else:
        row.update(sum_rate=rep.sum_rate, sinr_radar_db=10 * np.log10(rep.sinr_radar),
                   outer_iters=rep.iterations, status=rep.termination)
        iters = [{"cell_id": task.cell_id, "seed": task.seed, "iter": r["iter"],
                  "sum_rate": r["sum_rate"], "sinr_radar": r["sinr_radar"]} for r in rep.records]
        if task.trace_dir:
            path = os.path.join(task.trace_dir, f"cell{task.cell_id:03d}_seed{task.seed:03d}.json")
            with open(path, "w") as fh:
                fh.write(rep.to_json())
    row["wall_ms"] = round(1e3 * (time.perf_counter() - t0), 1)
    return row, iters


def summarize(rows):
    """Mean and standard deviation of the sum-rate per cell over feasible runs."""
    cells = {}
    for r in rows:
        cells.setdefault(r["cell_id"], []).append(r)
    out = []
    for cid, rs in sorted(cells.items()):
        ok = [float(r["sum_rate"]) for r in rs if r["sum_rate"] != ""]
        first = rs[0]
        out.append({k: first[k] for k in ("cell_id", "mode", "M", "Nt", "Nr", "K", "gamma_r_db", "si_db")}
                   | {"runs": len(rs), "feasible": len(ok),
                      "mean_sum_rate": float(np.mean(ok)) if ok else "",
                      "std_sum_rate": float(np.std(ok)) if ok else ""})
    return out


def run_experiment(config_path, sweep_spec, out_dir, modes=("full",), n_seeds=20, master_seed=0,
                   workers=1, run_options=None):
    """Execute a sweep and write all outputs; returns the process exit status."""
    base, file_opts = ScenarioConfig(), {}
    if config_path:
        base = load_config(config_path)
        with open(config_path) as fh:
            data = yaml.safe_load(fh) or {}
        file_opts = data.get("run", {}) if isinstance(data, dict) else {}
        unknown = set(file_opts) - RUN_KEYS
        if unknown:
            raise ValueError(f"unknown run field(s): {', '.join(sorted(unknown))}")
    options = {**file_opts, **(run_options or {})}
    sweep = parse_sweep(sweep_spec) if isinstance(sweep_spec, (list, tuple)) else dict(sweep_spec or {})
    os.makedirs(out_dir, exist_ok=True)
    trace_dir = os.path.join(out_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    tasks = build_tasks(base, sweep, list(modes), n_seeds, master_seed, options, trace_dir)

    with open(os.path.join(out_dir, "run_config.json"), "w") as fh:
        json.dump({"scenario": base.to_dict(), "sweep": sweep, "modes": list(modes), "seeds": n_seeds,
                   "master_seed": master_seed, "run": options}, fh, indent=2)

    rows = []
    results_path = os.path.join(out_dir, "results.csv")
    iter_path = os.path.join(out_dir, "iterations.csv")
    with open(results_path, "w", newline="") as rf, open(iter_path, "w", newline="") as itf:
        writer = csv.DictWriter(rf, fieldnames=RESULT_FIELDS)
        iwriter = csv.DictWriter(itf, fieldnames=["cell_id", "seed", "iter", "sum_rate", "sinr_radar"])
        writer.writeheader()
        iwriter.writeheader()
        if workers > 1:
            pool = ProcessPoolExecutor(max_workers=workers)
            results = pool.map(execute, tasks)
        else:
            pool, results = None, map(execute, tasks)
        try:
            # Single writer; map preserves submission order, so files are reproducible.
            for row, iters in results:
                writer.writerow(row)
                iwriter.writerows(iters)
                rf.flush()
                rows.append(row)
                logger.info("cell %s seed %s %s: %s", row["cell_id"], row["seed"], row["mode"], row["status"])
        finally:
            if pool is not None:
                pool.shutdown()

    summary = summarize(rows)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]))
        w.writeheader()
        w.writerows(summary)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="fdisac", description="Monte-Carlo sweeps of the joint ISAC design.")
    p.add_argument("--config", help="YAML file with a 'scenario' mapping (and optional 'run' mapping)")
    p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2",
                   help=f"sweep values; KEY in {', '.join(sorted(SWEEP_KEYS))}; repeatable")
    p.add_argument("--seeds", type=int, default=20, help="Monte-Carlo draws per cell")
    p.add_argument("--mode", default="full", help="comma list of full, noris, rndris")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-outer", type=int, help="cap on outer iterations")
    p.add_argument("--stop-tol", type=float, help="relative sum-rate change that stops a run")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    opts = {}
    if args.max_outer is not None:
        opts["max_outer"] = args.max_outer
    if args.stop_tol is not None:
        opts["stop_tol"] = args.stop_tol
    try:
        modes = parse_modes(args.mode)
        sweep = parse_sweep(args.sweep)
        if args.seeds < 1 or args.workers < 1:
            raise ValueError("--seeds and --workers must be >= 1")
        return run_experiment(args.config, sweep, args.out, modes, args.seeds, args.master_seed,
                              args.workers, opts)
    except (ValueError, OSError, yaml.YAMLError) as exc:
        print(f"fdisac: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
