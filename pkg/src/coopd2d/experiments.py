"""Experiment drivers: sweeps in, CSV tables out.

Every replication is seeded from (seed, sweep point, replication index),
so output is identical whatever the worker count or execution order.
Paired comparisons (the algorithm and scheme studies) reuse one drawn
scenario, training pass and fading tensor across all contenders per
replication to strip placement noise out of the contrasts.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .matching import (InvariantViolation, assignment_value, marginal_gap,
                       matching_without_transfer, optimal_matching,
                       random_matching, run_dma)
from .sim import (ScenarioConfig, build_payoff_matrix, closed_loop_metrics,
                  draw_realization, generate_scenario, realize_frame,
                  run_frame_two_timescale, run_mobility,
                  run_one_timescale_restricted, utility_means)

EXPERIMENT_NAMES = ("gap-stats", "avg-utility", "sumrate-vs-n", "outage-vs-n",
                    "one-timescale-compare", "epsilon-sweep",
                    "iterations-vs-epsilon", "mobility", "single-run")
ALGOS = ("dma", "optimal", "no_transfer", "random")

DEFAULT_N_VALUES = [5, 10, 15, 20, 25, 30, 35, 40]
DEFAULT_EPS_VALUES = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
DEFAULT_SIZES = [[10, 10], [15, 15], [20, 20]]
DEFAULT_SPEEDS = [1.0, 20.0]
DEFAULT_DURATION_S = 2.0
DEFAULT_BUCKET_S = 0.5


@dataclass
class ExperimentSpec:
    """Which study to run, over what grid, how many times."""

    name: str = "single-run"
    sweep: dict = field(default_factory=dict)
    replications: int = 1000
    seed: int = 0
    output_dir: str = "results"

    def __post_init__(self) -> None:
        if self.name not in EXPERIMENT_NAMES:
            raise ValueError(f"unknown experiment {self.name!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def rep_rng(seed: int, point: int, rep: int) -> np.random.Generator:
    """Deterministic stream for one replication at one sweep point."""
    return np.random.default_rng(np.random.SeedSequence([seed, point, rep]))


def _with_pair_count(cfg: ScenarioConfig, n: int) -> ScenarioConfig:
    # Sweeping N only makes sense with a uniform weight; config parsing
    # rejects per-pair weight lists for sweeping experiments.
    return replace(cfg, n_count=int(n), weights=float(cfg.weights[0]))


def _map_tasks(fn, tasks, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _mean(xs) -> float:
    return float(np.mean(np.asarray(xs, dtype=float)))


def _stderr(xs) -> float:
    a = np.asarray(xs, dtype=float)
    if a.size <= 1:
        return 0.0
    return float(a.std(ddof=1) / math.sqrt(a.size))


def _sweep_n(spec: ExperimentSpec) -> list[int]:
    return [int(x) for x in spec.sweep.get("n_values", DEFAULT_N_VALUES)]


def _sweep_eps(spec: ExperimentSpec) -> list[float]:
    return [float(x) for x in spec.sweep.get("eps_values",
                                             DEFAULT_EPS_VALUES)]


def _sweep_sizes(spec: ExperimentSpec) -> list[tuple[int, int]]:
    return [(int(m), int(n))
            for m, n in spec.sweep.get("sizes", DEFAULT_SIZES)]


def _sweep_speeds(spec: ExperimentSpec) -> list[float]:
    return [float(x) for x in spec.sweep.get("speeds", DEFAULT_SPEEDS)]


@dataclass
class AlgoRepResult:
    """One replication of the algorithm comparison on common draws."""

    wsr: dict
    outage_pct: dict
    value_dma: float
    value_opt: float
    iterations: int
    gaps: list | None = None


def _algo_rep(args) -> AlgoRepResult:
    cfg, point, rep, with_gaps = args
    rng = rep_rng(cfg.seed, point, rep)
    scn_rng, train_rng, select_rng, real_rng = rng.spawn(4)
    scn = generate_scenario(cfg, scn_rng)
    training = build_payoff_matrix(scn, cfg, train_rng)
    vals = training.payoff.values
    real = draw_realization(cfg.m_count, cfg.n_count,
                            cfg.subframes_per_frame, real_rng)
    dma_matching, trace = run_dma(vals, cfg.eps, select_rng,
                                  record_trace=False)
    matchings = {
        "dma": dma_matching,
        "optimal": optimal_matching(vals),
        "no_transfer": matching_without_transfer(vals, select_rng),
        "random": random_matching(vals, select_rng),
    }
    wsr = {}
    outage = {}
    for algo, mat in matchings.items():
        fm = realize_frame(scn, cfg, training, mat, real)
        wsr[algo] = fm.weighted_sum_rate
        outage[algo] = 100.0 * float(fm.outage.mean())
    gaps = None
    if with_gaps:
        gaps = [marginal_gap(vals, dma_matching, n)
                for n in range(cfg.n_count)]
    return AlgoRepResult(wsr, outage,
                         assignment_value(vals, dma_matching),
                         assignment_value(vals, matchings["optimal"]),
                         trace.iterations, gaps)


def run_algo_sweep(cfg: ScenarioConfig, n_values: list[int],
                   replications: int, threads: int = 1,
                   with_gaps: bool = False) -> dict[int, list[AlgoRepResult]]:
    """Algorithm comparison across the pair-count sweep; the workhorse
    behind the sum-rate, outage and gap tables."""
    tasks = []
    for point, n in enumerate(n_values):
        cfg_n = _with_pair_count(cfg, n)
        tasks.extend((cfg_n, point, rep, with_gaps)
                     for rep in range(replications))
    flat = _map_tasks(_algo_rep, tasks, threads)
    out = {}
    for i, n in enumerate(n_values):
        out[n] = flat[i * replications:(i + 1) * replications]
    return out


def _sumrate_rows(spec, cfg, threads):
    # Running estimates, one row per replication: the last row of each
    # (n, algo) group is the final mean with its standard error.
    n_values = _sweep_n(spec)
    sweep = run_algo_sweep(cfg, n_values, spec.replications, threads)
    rows = []
    for n in n_values:
        for algo in ALGOS:
            xs = [r.wsr[algo] for r in sweep[n]]
            for r in range(1, len(xs) + 1):
                rows.append([n, algo, _mean(xs[:r]), _stderr(xs[:r])])
    return ["n", "algo", "mean_wsr", "stderr"], rows


def _outage_rows(spec, cfg, threads):
    n_values = _sweep_n(spec)
    sweep = run_algo_sweep(cfg, n_values, spec.replications, threads)
    rows = []
    for n in n_values:
        for algo in ALGOS:
            xs = [r.outage_pct[algo] for r in sweep[n]]
            rows.append([n, algo, _mean(xs), _stderr(xs)])
    return ["n", "algo", "outage_pct", "stderr"], rows


def _gap_rows(spec, cfg, threads):
    n_values = _sweep_n(spec)
    sweep = run_algo_sweep(cfg, n_values, spec.replications, threads,
                           with_gaps=True)
    rows = []
    for n in n_values:
        gaps = np.concatenate([r.gaps for r in sweep[n]])
        rows.append([n, float(gaps.max() / cfg.eps),
                     float(gaps.mean() / cfg.eps)])
    return ["n", "max_gap_over_eps", "mean_gap_over_eps"], rows


def _utility_rep(args):
    cfg, point, rep = args
    rng = rep_rng(cfg.seed, point, rep)
    scn_rng, train_rng, select_rng = rng.spawn(3)
    scn = generate_scenario(cfg, scn_rng)
    training = build_payoff_matrix(scn, cfg, train_rng)
    matching, _ = run_dma(training.payoff.values, cfg.eps, select_rng,
                          record_trace=False)
    return utility_means(matching, training.payoff.values)


def _utility_rows(spec, cfg, threads):
    n_values = _sweep_n(spec)
    tasks = []
    for point, n in enumerate(n_values):
        cfg_n = _with_pair_count(cfg, n)
        tasks.extend((cfg_n, point, rep) for rep in range(spec.replications))
    flat = _map_tasks(_utility_rep, tasks, threads)
    rows = []
    for i, n in enumerate(n_values):
        batch = flat[i * spec.replications:(i + 1) * spec.replications]
        rows.append([n, "cu", _mean([b[0] for b in batch])])
        rows.append([n, "d2d", _mean([b[1] for b in batch])])
    return ["n", "side", "eau"], rows


def _timescale_rep(args):
    cfg, point, rep = args
    rng = rep_rng(cfg.seed, point, rep)
    scn_rng, train_rng, select_rng, real_rng = rng.spawn(4)
    scn = generate_scenario(cfg, scn_rng)
    training = build_payoff_matrix(scn, cfg, train_rng)
    matching, trace = run_dma(training.payoff.values, cfg.eps, select_rng,
                              record_trace=False)
    real = draw_realization(cfg.m_count, cfg.n_count,
                            cfg.subframes_per_frame, real_rng)
    two = realize_frame(scn, cfg, training, matching, real)
    two.dma_iterations = trace.iterations
    one = run_one_timescale_restricted(scn, cfg, realization=real)
    return two, one


def _timescale_rows(spec, cfg, threads):
    n_values = _sweep_n(spec)
    tasks = []
    for point, n in enumerate(n_values):
        cfg_n = _with_pair_count(cfg, n)
        tasks.extend((cfg_n, point, rep) for rep in range(spec.replications))
    flat = _map_tasks(_timescale_rep, tasks, threads)
    rows = []
    for i, n in enumerate(n_values):
        batch = flat[i * spec.replications:(i + 1) * spec.replications]
        for label, pick in (("two_timescale", 0), ("one_timescale", 1)):
            frames = [b[pick] for b in batch]
            rows.append([
                n, label,
                _mean([f.weighted_sum_rate for f in frames]),
                _mean([100.0 * f.outage.mean() for f in frames]),
                _mean([f.csi_acquisition_count for f in frames]),
                _mean([f.matching_switch_count for f in frames]),
            ])
    return ["n", "scheme", "mean_wsr", "outage_pct", "csi_count",
            "switch_count"], rows


def _eps_rep(args):
    cfg, point, rep = args
    rng = rep_rng(cfg.seed, point, rep)
    scn_rng, train_rng, select_rng = rng.spawn(3)
    scn = generate_scenario(cfg, scn_rng)
    training = build_payoff_matrix(scn, cfg, train_rng)
    vals = training.payoff.values
    dma_m, _ = run_dma(vals, cfg.eps, select_rng, record_trace=False)
    wsr_dma = closed_loop_metrics(scn, cfg, training, dma_m).weighted_sum_rate
    wsr_opt = closed_loop_metrics(scn, cfg, training,
                                  optimal_matching(vals)).weighted_sum_rate
    return wsr_dma, wsr_opt


def _eps_rows(spec, cfg, threads):
    eps_values = _sweep_eps(spec)
    tasks = []
    for point, eps in enumerate(eps_values):
        cfg_e = replace(cfg, eps=eps)
        tasks.extend((cfg_e, point, rep) for rep in range(spec.replications))
    flat = _map_tasks(_eps_rep, tasks, threads)
    rows = []
    for i, eps in enumerate(eps_values):
        batch = flat[i * spec.replications:(i + 1) * spec.replications]
        rows.append([eps, "dma", _mean([b[0] for b in batch])])
        rows.append([eps, "optimal", _mean([b[1] for b in batch])])
    return ["eps", "algo", "mean_wsr"], rows


def _iters_rep(args):
    cfg, point, rep = args
    rng = rep_rng(cfg.seed, point, rep)
    scn_rng, train_rng, select_rng = rng.spawn(3)
    scn = generate_scenario(cfg, scn_rng)
    training = build_payoff_matrix(scn, cfg, train_rng)
    _, trace = run_dma(training.payoff.values, cfg.eps, select_rng,
                       record_trace=False)
    return trace.iterations


def _iters_rows(spec, cfg, threads):
    eps_values = _sweep_eps(spec)
    sizes = _sweep_sizes(spec)
    tasks = []
    grid = []
    for eps in eps_values:
        for m, n in sizes:
            grid.append((eps, m, n))
    for point, (eps, m, n) in enumerate(grid):
        cfg_p = replace(_with_pair_count(cfg, n), m_count=m, eps=eps)
        tasks.extend((cfg_p, point, rep) for rep in range(spec.replications))
    flat = _map_tasks(_iters_rep, tasks, threads)
    rows = []
    for i, (eps, m, n) in enumerate(grid):
        batch = flat[i * spec.replications:(i + 1) * spec.replications]
        rows.append([eps, m, n, _mean(batch)])
    return ["eps", "m", "n", "mean_iterations"], rows


def _mobility_rep(args):
    cfg, point, rep, speed, duration_s, bucket_s = args
    rng = rep_rng(cfg.seed, point, rep)
    scn_rng, run_rng = rng.spawn(2)
    scn = generate_scenario(cfg, scn_rng)
    buckets = run_mobility(scn, cfg, speed, duration_s, run_rng,
                           bucket_s=bucket_s)
    return [(t, fm.weighted_sum_rate, 100.0 * float(fm.outage.mean()))
            for t, fm in buckets]


def _mobility_rows(spec, cfg, threads):
    speeds = _sweep_speeds(spec)
    duration = float(spec.sweep.get("duration_s", DEFAULT_DURATION_S))
    bucket_s = float(spec.sweep.get("bucket_s", DEFAULT_BUCKET_S))
    tasks = []
    for point, speed in enumerate(speeds):
        tasks.extend((cfg, point, rep, speed, duration, bucket_s)
                     for rep in range(spec.replications))
    flat = _map_tasks(_mobility_rep, tasks, threads)
    rows = []
    for i, speed in enumerate(speeds):
        batch = flat[i * spec.replications:(i + 1) * spec.replications]
        bucket_count = len(batch[0])
        for b in range(bucket_count):
            t_bucket = batch[0][b][0]
            rows.append([t_bucket, speed,
                         _mean([rep_out[b][1] for rep_out in batch]),
                         _mean([rep_out[b][2] for rep_out in batch])])
    return ["t_bucket", "speed", "mean_wsr", "outage_pct"], rows


def _single_rep(args):
    cfg, point, rep = args
    rng = rep_rng(cfg.seed, point, rep)
    scn_rng, frame_rng = rng.spawn(2)
    scn = generate_scenario(cfg, scn_rng)
    return run_frame_two_timescale(scn, cfg, frame_rng)


def _single_rows(spec, cfg, threads):
    # One frame, one row, whatever the replication setting says.
    fm = _single_rep((cfg, 0, 0))
    row = [0, fm.weighted_sum_rate, 100.0 * float(fm.outage.mean()),
           fm.eau_cu, fm.eau_d2d, fm.dma_iterations]
    return ["rep", "wsr", "outage_pct", "eau_cu", "eau_d2d",
            "iterations"], [row]


_DRIVERS = {
    "gap-stats": _gap_rows,
    "avg-utility": _utility_rows,
    "sumrate-vs-n": _sumrate_rows,
    "outage-vs-n": _outage_rows,
    "one-timescale-compare": _timescale_rows,
    "epsilon-sweep": _eps_rows,
    "iterations-vs-epsilon": _iters_rows,
    "mobility": _mobility_rows,
    "single-run": _single_rows,
}


def _clean_cell(x):
    if isinstance(x, (bool, np.bool_)):
        raise InvariantViolation("boolean cell in CSV output")
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            raise InvariantViolation("non-finite value in CSV output")
        return x
    return str(x)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_clean_cell(x) for x in row])


def summarize_csv(path: str) -> str:
    """Human-readable digest recomputed from the file just written, so
    the numbers cannot drift from the table."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    lines = [f"wrote {path} ({len(rows)} rows)"]
    for j, name in enumerate(header):
        try:
            vals = [float(r[j]) for r in rows]
        except ValueError:
            continue
        if vals:
            lines.append(f"  mean {name} = {_mean(vals)!r}")
    return "\n".join(lines)


def run_experiment(spec: ExperimentSpec, cfg: ScenarioConfig,
                   threads: int = 1) -> tuple[list[str], str]:
    """Run one experiment end to end; returns (paths, summary text)."""
    os.makedirs(spec.output_dir, exist_ok=True)
    header, rows = _DRIVERS[spec.name](spec, cfg, threads)
    path = os.path.join(spec.output_dir, f"{spec.name}.csv")
    write_csv(path, header, rows)
    parts = [f"experiment: {spec.name}",
             f"replications: {spec.replications}",
             f"seed: {spec.seed}",
             summarize_csv(path)]
    return [path], "\n".join(parts)
