"""Scenario generation and frame-level simulation.

A frame runs on two timescales. At the frame start each CU trains a
payoff estimate for every D2D pair from fading samples, the assignment
is settled once (auction or a baseline), and each matched pair then
applies its threshold policy subframe by subframe on fresh fading.

Also here: a one-timescale reference scheme that re-solves a restricted
per-subframe matching, and a mobility variant that keeps the frame-start
matching and policies while nodes drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import GAIN_FLOOR, RadioParams
from .matching import (Matching, PayoffMatrix, matching_from_pairs,
                       optimal_assignment, run_dma)
from .policy import classify_states, solve_threshold_batch

TWO_PI = 2.0 * math.pi


@dataclass
class ScenarioConfig:
    """Scenario shape, radio parameters and per-frame bookkeeping."""

    m_count: int = 15
    n_count: int = 15
    cell_radius: float = 500.0
    d2d_ring: tuple = (200.0, 400.0)
    d2d_link_range: tuple = (10.0, 30.0)
    radio: RadioParams = field(
        default_factory=lambda: RadioParams(p_c=0.02, p_d=0.02, n0=1e-13))
    r_th: float = 1.8 * math.log(2.0)
    weights: np.ndarray | None = None
    subframes_per_frame: int = 1000
    training_samples: int = 10000
    eps: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.m_count < 1 or self.n_count < 1:
            raise ValueError("need at least one CU and one D2D pair")
        if self.cell_radius <= 0:
            raise ValueError("cell radius must be positive")
        lo, hi = self.d2d_ring
        if not 0 < lo <= hi:
            raise ValueError("D2D ring radii must be ordered and positive")
        lo, hi = self.d2d_link_range
        if not 0 < lo <= hi:
            raise ValueError("D2D link range must be ordered and positive")
        if self.r_th < 0:
            raise ValueError("rate floor must be nonnegative")
        if self.subframes_per_frame < 1 or self.training_samples < 1:
            raise ValueError("subframe and training counts must be positive")
        if self.eps <= 0:
            raise ValueError("price step must be strictly positive")
        if self.weights is None:
            self.weights = np.ones(self.n_count)
        elif np.isscalar(self.weights):
            self.weights = np.full(self.n_count, float(self.weights))
        else:
            self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.n_count,) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive, one per D2D pair")


@dataclass
class Scenario:
    """Node placement: CU, D2D transmitter and receiver positions, with
    the base station at the origin."""

    cu_pos: np.ndarray  # (M, 2)
    dt_pos: np.ndarray  # (N, 2)
    dr_pos: np.ndarray  # (N, 2)

    def __post_init__(self) -> None:
        self.cu_pos = np.asarray(self.cu_pos, dtype=float)
        self.dt_pos = np.asarray(self.dt_pos, dtype=float)
        self.dr_pos = np.asarray(self.dr_pos, dtype=float)
        for arr in (self.cu_pos, self.dt_pos, self.dr_pos):
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
                raise ValueError("positions must be (count, 2) arrays")
            if not np.all(np.isfinite(arr)):
                raise ValueError("positions must be finite")
        if self.dt_pos.shape != self.dr_pos.shape:
            raise ValueError("each D2D pair needs both endpoints")

    @property
    def m_count(self) -> int:
        return self.cu_pos.shape[0]

    @property
    def n_count(self) -> int:
        return self.dt_pos.shape[0]

    def distances(self):
        """(d_mb, d_mn, d_nb, d_nn): CU-BS (M,), CU-DT (M, N), DT-BS (N,),
        DT-DR (N,)."""
        d_mb = np.linalg.norm(self.cu_pos, axis=1)
        d_mn = np.linalg.norm(
            self.cu_pos[:, None, :] - self.dt_pos[None, :, :], axis=2)
        d_nb = np.linalg.norm(self.dt_pos, axis=1)
        d_nn = np.linalg.norm(self.dt_pos - self.dr_pos, axis=1)
        return d_mb, d_mn, d_nb, d_nn

    def to_json(self) -> str:
        return json.dumps({"cu": self.cu_pos.tolist(),
                           "dt": self.dt_pos.tolist(),
                           "dr": self.dr_pos.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        raw = json.loads(text)
        return cls(np.array(raw["cu"]), np.array(raw["dt"]),
                   np.array(raw["dr"]))


def generate_scenario(cfg: ScenarioConfig,
                      rng: np.random.Generator) -> Scenario:
    """Drop CUs on the cell edge and D2D transmitters uniformly over the
    ring, each with its receiver at a uniform offset."""
    ang = rng.uniform(0.0, TWO_PI, cfg.m_count)
    cu = cfg.cell_radius * np.column_stack([np.cos(ang), np.sin(ang)])

    lo, hi = cfg.d2d_ring
    # Area-uniform radius over the ring.
    radius = np.sqrt(rng.uniform(lo * lo, hi * hi, cfg.n_count))
    ang = rng.uniform(0.0, TWO_PI, cfg.n_count)
    dt = radius[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])

    lo, hi = cfg.d2d_link_range
    dist = rng.uniform(lo, hi, cfg.n_count)
    ang = rng.uniform(0.0, TWO_PI, cfg.n_count)
    dr = dt + dist[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    return Scenario(cu, dt, dr)


def _snr(power: float, fading, dist, radio: RadioParams):
    gain = np.maximum(fading * np.asarray(dist) ** -radio.gamma, GAIN_FLOOR)
    return power * gain / radio.n0


@dataclass
class PairPolicies:
    """Per-pair threshold policies fitted on the training samples."""

    feasible: np.ndarray  # (M, N) bool
    lam: np.ndarray       # (M, N)
    alpha: np.ndarray     # (M, N)


@dataclass
class TrainingResult:
    """Everything the frame-start training pass produces."""

    payoff: PayoffMatrix         # weighted pair values w_n * u_mn
    policies: PairPolicies
    pair_d2d_mean: np.ndarray    # (M, N) expected D2D rate under the policy
    pair_cu_mean: np.ndarray     # (M, N) expected cooperative CU rate
    solo_cu_mean: np.ndarray     # (M,) expected direct-only CU rate


def build_payoff_matrix(scn: Scenario, cfg: ScenarioConfig,
                        rng: np.random.Generator) -> TrainingResult:
    """Train per-pair threshold policies and the payoff matrix.

    One CU row at a time: the CU-BS fade of a draw is shared across the
    row, the other three links are drawn per pair. Infeasible pairs get
    payoff -w_n.
    """
    m, n, k = cfg.m_count, cfg.n_count, cfg.training_samples
    d_mb, d_mn, d_nb, d_nn = scn.distances()
    radio = cfg.radio
    uniform = np.full(k, 1.0 / k)

    feas = np.empty((m, n), dtype=bool)
    lam = np.empty((m, n))
    alpha = np.empty((m, n))
    d2d_mean = np.empty((m, n))
    cu_mean = np.empty((m, n))
    solo = np.empty(m)
    values = np.empty((m, n))

    for i in range(m):
        xi_mb = rng.exponential(1.0, k)
        xi_mn = rng.exponential(1.0, (n, k))
        xi_nb = rng.exponential(1.0, (n, k))
        xi_nn = rng.exponential(1.0, (n, k))

        snr_mb = _snr(radio.p_c, xi_mb, d_mb[i], radio)
        direct = np.log1p(snr_mb)
        snr_mn = _snr(radio.p_c, xi_mn, d_mn[i][:, None], radio)
        snr_nb = _snr(radio.p_d, xi_nb, d_nb[:, None], radio)
        relay = 0.5 * np.minimum(np.log1p(snr_mn),
                                 np.log1p(snr_mb[None, :] + snr_nb))
        r_c = np.maximum(direct[None, :], relay)
        r_d = np.log1p(_snr(radio.p_d, xi_nn, d_nn[:, None], radio))

        row = solve_threshold_batch(r_c, r_d, uniform, cfg.r_th)
        feas[i], lam[i], alpha[i], d2d_mean[i] = row
        values[i] = cfg.weights * d2d_mean[i]
        cu_mean[i] = r_c.mean(axis=1)
        solo[i] = direct.mean()

    payoff = PayoffMatrix(values, cfg.weights.copy())
    policies = PairPolicies(feas, lam, alpha)
    return TrainingResult(payoff, policies, d2d_mean, cu_mean, solo)


@dataclass
class Realization:
    """Fresh unit-mean fading for every link over the subframes of one
    frame; the CU-BS fade is shared across that CU's row."""

    xi_mb: np.ndarray  # (M, T)
    xi_mn: np.ndarray  # (M, N, T)
    xi_nb: np.ndarray  # (M, N, T)
    xi_nn: np.ndarray  # (M, N, T)


def draw_realization(m_count: int, n_count: int, t_count: int,
                     rng: np.random.Generator) -> Realization:
    return Realization(
        rng.exponential(1.0, (m_count, t_count)),
        rng.exponential(1.0, (m_count, n_count, t_count)),
        rng.exponential(1.0, (m_count, n_count, t_count)),
        rng.exponential(1.0, (m_count, n_count, t_count)))


@dataclass
class FrameMetrics:
    """Realized per-frame outcome of one scheme on one scenario."""

    d2d_rates: np.ndarray        # (N,) frame-average D2D rates
    cu_rates: np.ndarray         # (M,) frame-average CU rates
    matching: Matching
    weighted_sum_rate: float
    outage: np.ndarray           # (M,) bool
    eau_cu: float                # mean matched-CU utility (price received)
    eau_d2d: float               # mean matched-pair utility (value - price)
    matching_switch_count: int = 0
    csi_acquisition_count: int = 0
    dma_iterations: int = 0


def utility_means(matching: Matching, values: np.ndarray):
    matched_m = matching.cu_partner >= 0
    matched_n = matching.dp_partner >= 0
    eau_cu = float(matching.prices[matched_m].mean()) if np.any(
        matched_m) else 0.0
    delta = matching.dp_utilities(values)
    eau_d2d = float(delta[matched_n].mean()) if np.any(matched_n) else 0.0
    return eau_cu, eau_d2d


def realize_frame(scn: Scenario, cfg: ScenarioConfig, training: TrainingResult,
                  matching: Matching, real: Realization) -> FrameMetrics:
    """Play the frame-start policies against fresh fading.

    Matched feasible pairs run their threshold rule; matched infeasible
    pairs (only baselines produce them) hand the CU every subframe;
    unmatched CUs fall back to the direct link. A CU is in outage when
    its training-estimated average rate misses the floor.
    """
    m_count, n_count = cfg.m_count, cfg.n_count
    t_count = real.xi_mb.shape[1]
    d_mb, d_mn, d_nb, d_nn = scn.distances()
    radio = cfg.radio
    pol = training.policies

    cu_rates = np.zeros(m_count)
    d2d_rates = np.zeros(n_count)
    outage = np.zeros(m_count, dtype=bool)

    for m in range(m_count):
        snr_mb = _snr(radio.p_c, real.xi_mb[m], d_mb[m], radio)
        direct = np.log1p(snr_mb)
        n = int(matching.cu_partner[m])
        if n < 0:
            cu_rates[m] = direct.mean()
            outage[m] = training.solo_cu_mean[m] < cfg.r_th
            continue
        snr_mn = _snr(radio.p_c, real.xi_mn[m, n], d_mn[m, n], radio)
        snr_nb = _snr(radio.p_d, real.xi_nb[m, n], d_nb[n], radio)
        relay = 0.5 * np.minimum(np.log1p(snr_mn), np.log1p(snr_mb + snr_nb))
        r_c = np.maximum(direct, relay)
        r_d = np.log1p(_snr(radio.p_d, real.xi_nn[m, n], d_nn[n], radio))
        if pol.feasible[m, n]:
            _, tie, above = classify_states(r_c, r_d, pol.lam[m, n])
            pi = above.astype(float) + pol.alpha[m, n] * tie
            cu_rates[m] = np.mean((1.0 - pi) * r_c)
            d2d_rates[n] = np.mean(pi * r_d)
        else:
            cu_rates[m] = r_c.mean()
            outage[m] = training.pair_cu_mean[m, n] < cfg.r_th

    wsr = float(np.sum(cfg.weights * d2d_rates))
    eau_cu, eau_d2d = utility_means(matching, training.payoff.values)
    return FrameMetrics(d2d_rates, cu_rates, matching, wsr, outage,
                        eau_cu, eau_d2d, matching_switch_count=0,
                        csi_acquisition_count=matching.matched_count * t_count)


def closed_loop_metrics(scn: Scenario, cfg: ScenarioConfig,
                        training: TrainingResult,
                        matching: Matching) -> FrameMetrics:
    """Frame outcome with the training expectations standing in for fresh
    fading: matched feasible pairs realize exactly the floor and their
    trained D2D rate. Cheap and noise-free."""
    cu_rates = np.array(training.solo_cu_mean, copy=True)
    d2d_rates = np.zeros(cfg.n_count)
    outage = training.solo_cu_mean < cfg.r_th
    for m, n in matching.pairs():
        if training.policies.feasible[m, n]:
            cu_rates[m] = cfg.r_th
            d2d_rates[n] = training.pair_d2d_mean[m, n]
            outage[m] = False
        else:
            cu_rates[m] = training.pair_cu_mean[m, n]
            outage[m] = training.pair_cu_mean[m, n] < cfg.r_th
    wsr = float(np.sum(cfg.weights * d2d_rates))
    eau_cu, eau_d2d = utility_means(matching, training.payoff.values)
    return FrameMetrics(d2d_rates, cu_rates, matching, wsr, outage,
                        eau_cu, eau_d2d, matching_switch_count=0,
                        csi_acquisition_count=(
                            matching.matched_count * cfg.subframes_per_frame))


def run_frame_two_timescale(scn: Scenario, cfg: ScenarioConfig,
                            rng: np.random.Generator, matcher=None,
                            reuse_training: bool = False) -> FrameMetrics:
    """Full frame: train, match, realize.

    ``matcher`` overrides the auction: a callable (values, rng) -> Matching.
    ``reuse_training`` skips the fresh-fading stage and reports the
    trained expectations instead.
    """
    train_rng, select_rng, real_rng = rng.spawn(3)
    training = build_payoff_matrix(scn, cfg, train_rng)
    iterations = 0
    if matcher is None:
        matching, trace = run_dma(training.payoff.values, cfg.eps,
                                  select_rng, record_trace=False)
        iterations = trace.iterations
    else:
        matching = matcher(training.payoff.values, select_rng)
    if reuse_training:
        frame = closed_loop_metrics(scn, cfg, training, matching)
    else:
        real = draw_realization(cfg.m_count, cfg.n_count,
                                cfg.subframes_per_frame, real_rng)
        frame = realize_frame(scn, cfg, training, matching, real)
    frame.dma_iterations = iterations
    return frame


def _best_positive_edge(v: np.ndarray, row_ok: np.ndarray,
                        col_ok: np.ndarray):
    """Best strictly positive edge inside the unmasked submatrix."""
    open_v = np.where(row_ok[:, None] & col_ok[None, :], v, -np.inf)
    flat = int(np.argmax(open_v))
    m, n = divmod(flat, v.shape[1])
    if open_v[m, n] <= 0:
        return None, 0.0
    return (m, n), float(open_v[m, n])


def _best_step(v: np.ndarray, prev: set) -> set:
    """Best matching reachable from ``prev`` by changing at most two edges.

    Enumerates removals, additions and swaps exactly: up to two removals,
    one addition, one removal plus one addition, and two additions (the
    best single edge either belongs to the best 2-addition or blocks both
    of its members, one per axis)."""
    m_count, n_count = v.shape
    edges = sorted(prev)
    base = float(sum(v[e] for e in edges))
    best_val, best = base, prev

    def consider(val, cand):
        nonlocal best_val, best
        if val > best_val + 1e-15:
            best_val, best = val, cand

    for i, e1 in enumerate(edges):
        consider(base - v[e1], prev - {e1})
        for e2 in edges[i + 1:]:
            consider(base - v[e1] - v[e2], prev - {e1, e2})

    row_ok = np.ones(m_count, dtype=bool)
    col_ok = np.ones(n_count, dtype=bool)
    for m, n in edges:
        row_ok[m] = False
        col_ok[n] = False

    first, g1 = _best_positive_edge(v, row_ok, col_ok)
    if first is not None:
        consider(base + g1, prev | {first})

    for e1 in edges:
        r2, c2 = row_ok.copy(), col_ok.copy()
        r2[e1[0]] = True
        c2[e1[1]] = True
        add, gain = _best_positive_edge(v, r2, c2)
        if add is not None:
            consider(base - v[e1] + gain, (prev - {e1}) | {add})

    if first is not None:
        r2, c2 = row_ok.copy(), col_ok.copy()
        r2[first[0]] = False
        c2[first[1]] = False
        second, g2 = _best_positive_edge(v, r2, c2)
        if second is not None:
            consider(base + g1 + g2, prev | {first, second})
        row_only = np.zeros(m_count, dtype=bool)
        row_only[first[0]] = True
        c3 = col_ok.copy()
        c3[first[1]] = False
        in_row, g3 = _best_positive_edge(v, row_only, c3)
        col_only = np.zeros(n_count, dtype=bool)
        col_only[first[1]] = True
        r3 = row_ok.copy()
        r3[first[0]] = False
        in_col, g4 = _best_positive_edge(v, r3, col_only)
        if in_row is not None and in_col is not None:
            consider(base + g3 + g4, prev | {in_row, in_col})
    return best


def run_one_timescale_restricted(scn: Scenario, cfg: ScenarioConfig,
                                 rng: np.random.Generator | None = None,
                                 rates_override=None,
                                 realization: Realization | None = None
                                 ) -> FrameMetrics:
    """Reference scheme that re-matches every subframe.

    Each subframe prices pair (m, n) at w_n * (1 - r_th / r_c) * r_d when
    the cooperative rate covers the floor (a large penalty otherwise),
    solves the first subframe outright and afterwards moves at most two
    edges per subframe. Needs instantaneous CSI for every pair.

    ``realization`` reuses already-drawn fading (for paired comparisons);
    ``rates_override`` is a (r_c, r_d, solo) test seam.
    """
    m_count, n_count = cfg.m_count, cfg.n_count
    radio = cfg.radio
    if rates_override is None:
        if realization is None:
            if rng is None:
                raise ValueError("need an rng when no fading is supplied")
            realization = draw_realization(m_count, n_count,
                                           cfg.subframes_per_frame, rng)
        real = realization
        t_count = real.xi_mb.shape[1]
        d_mb, d_mn, d_nb, d_nn = scn.distances()
        snr_mb = _snr(radio.p_c, real.xi_mb, d_mb[:, None], radio)
        solo = np.log1p(snr_mb)                       # (M, T)
        snr_mn = _snr(radio.p_c, real.xi_mn, d_mn[:, :, None], radio)
        snr_nb = _snr(radio.p_d, real.xi_nb, d_nb[None, :, None], radio)
        relay = 0.5 * np.minimum(np.log1p(snr_mn),
                                 np.log1p(snr_mb[:, None, :] + snr_nb))
        r_c = np.maximum(solo[:, None, :], relay)     # (M, N, T)
        r_d = np.log1p(_snr(radio.p_d, real.xi_nn, d_nn[None, :, None],
                            radio))
    else:
        r_c, r_d, solo = rates_override
        r_c = np.asarray(r_c, dtype=float)
        r_d = np.asarray(r_d, dtype=float)
        solo = np.asarray(solo, dtype=float)
        t_count = r_c.shape[2]

    r_th = cfg.r_th
    w = cfg.weights
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(r_c > 0, 1.0 - r_th / np.where(r_c > 0, r_c, 1.0),
                         1.0)
    feasible = r_c >= r_th
    value = np.where(feasible, w[None, :, None] * share * r_d, -1e9)

    cu_acc = np.zeros(m_count)
    d2d_acc = np.zeros(n_count)
    switches = 0
    cur: set = set()
    for t in range(t_count):
        v_t = value[:, :, t]
        if t == 0:
            pairs, _ = optimal_assignment(v_t)
            cur = set(pairs)
        else:
            new = _best_step(v_t, cur)
            switches += len(new ^ cur)
            cur = new
        matched_rows = np.zeros(m_count, dtype=bool)
        for m, n in cur:
            matched_rows[m] = True
            if feasible[m, n, t]:
                cu_acc[m] += r_th
                d2d_acc[n] += share[m, n, t] * r_d[m, n, t]
            else:
                cu_acc[m] += r_c[m, n, t]
        cu_acc[~matched_rows] += solo[~matched_rows, t]

    cu_rates = cu_acc / t_count
    d2d_rates = d2d_acc / t_count
    outage = cu_rates < r_th - 1e-9
    wsr = float(np.sum(w * d2d_rates))
    matching = matching_from_pairs(m_count, n_count, sorted(cur))
    return FrameMetrics(d2d_rates, cu_rates, matching, wsr, outage,
                        eau_cu=0.0, eau_d2d=0.0,
                        matching_switch_count=switches,
                        csi_acquisition_count=m_count * n_count * t_count)


def _reflect(pos: np.ndarray, vel: np.ndarray, radius: float,
             follower: np.ndarray | None = None) -> None:
    """Specular reflection at the cell boundary, in place.

    ``follower`` positions ride along rigidly (same shift, same velocity
    array) so a D2D receiver keeps its offset from its transmitter.
    """
    r = np.linalg.norm(pos, axis=1)
    out = r > radius
    if not np.any(out):
        return
    nhat = pos[out] / r[out, None]
    shift = -2.0 * (r[out] - radius)[:, None] * nhat
    pos[out] += shift
    if follower is not None:
        follower[out] += shift
    v_norm = np.sum(vel[out] * nhat, axis=1, keepdims=True)
    vel[out] -= 2.0 * v_norm * nhat


def run_mobility(scn: Scenario, cfg: ScenarioConfig, speed: float,
                 duration_s: float, rng: np.random.Generator,
                 subframe_len_s: float = 1e-3,
                 bucket_s: float = 0.5) -> list[tuple[float, FrameMetrics]]:
    """Hold the frame-start matching and policies while nodes move.

    Random-direction motion: every node travels at ``speed`` with a
    uniform random heading redrawn at each bucket boundary; a D2D pair
    shares one heading so its own link length never changes. Positions
    advance each subframe with specular reflection at the cell edge.
    Returns one (bucket start time, metrics) entry per ``bucket_s`` of
    simulated time.

    A CU is flagged in outage for a bucket when its bucket-average rate
    sits more than three standard errors below the floor.
    """
    t_count = int(round(duration_s / subframe_len_s))
    bucket = int(round(bucket_s / subframe_len_s))
    if bucket < 2 or t_count % bucket != 0:
        raise ValueError("bucket length must divide the duration and span "
                         "at least two subframes")
    m_count, n_count = cfg.m_count, cfg.n_count
    radio = cfg.radio

    train_rng, select_rng, motion_rng, fade_rng = rng.spawn(4)
    training = build_payoff_matrix(scn, cfg, train_rng)
    matching, trace = run_dma(training.payoff.values, cfg.eps, select_rng,
                              record_trace=False)
    pairs = matching.pairs()
    p_count = len(pairs)
    idx_m = np.array([m for m, _ in pairs], dtype=int)
    idx_n = np.array([n for _, n in pairs], dtype=int)

    def draw_vel(count):
        head = motion_rng.uniform(0.0, TWO_PI, count)
        return speed * np.column_stack([np.cos(head), np.sin(head)])

    cu_vel = draw_vel(m_count)
    dp_vel = draw_vel(n_count)

    cu = scn.cu_pos.copy()
    dt = scn.dt_pos.copy()
    dr = scn.dr_pos.copy()
    d_nn = np.linalg.norm(dt - dr, axis=1)

    d_mb_t = np.empty((t_count, m_count))
    d_mn_t = np.empty((t_count, p_count))
    d_nb_t = np.empty((t_count, p_count))
    step = subframe_len_s
    for t in range(t_count):
        if t > 0 and t % bucket == 0:
            cu_vel = draw_vel(m_count)
            dp_vel = draw_vel(n_count)
        cu += cu_vel * step
        _reflect(cu, cu_vel, cfg.cell_radius)
        dt += dp_vel * step
        dr += dp_vel * step
        _reflect(dt, dp_vel, cfg.cell_radius, follower=dr)
        d_mb_t[t] = np.linalg.norm(cu, axis=1)
        if p_count:
            d_mn_t[t] = np.linalg.norm(cu[idx_m] - dt[idx_n], axis=1)
            d_nb_t[t] = np.linalg.norm(dt[idx_n], axis=1)

    xi_mb = fade_rng.exponential(1.0, (m_count, t_count))
    snr_mb = _snr(radio.p_c, xi_mb, d_mb_t.T, radio)
    direct = np.log1p(snr_mb)                       # (M, T)

    cu_sub = direct.copy()
    d2d_sub = np.zeros((n_count, t_count))
    if p_count:
        xi_mn = fade_rng.exponential(1.0, (p_count, t_count))
        xi_nb = fade_rng.exponential(1.0, (p_count, t_count))
        xi_nn = fade_rng.exponential(1.0, (p_count, t_count))
        snr_mn = _snr(radio.p_c, xi_mn, d_mn_t.T, radio)
        snr_nb = _snr(radio.p_d, xi_nb, d_nb_t.T, radio)
        relay = 0.5 * np.minimum(np.log1p(snr_mn),
                                 np.log1p(snr_mb[idx_m] + snr_nb))
        r_c = np.maximum(direct[idx_m], relay)
        r_d = np.log1p(_snr(radio.p_d, xi_nn, d_nn[idx_n][:, None], radio))
        for j in range(p_count):
            lam = training.policies.lam[idx_m[j], idx_n[j]]
            alpha = training.policies.alpha[idx_m[j], idx_n[j]]
            _, tie, above = classify_states(r_c[j], r_d[j], lam)
            pi = above.astype(float) + alpha * tie
            cu_sub[idx_m[j]] = (1.0 - pi) * r_c[j]
            d2d_sub[idx_n[j]] = pi * r_d[j]

    eau_cu, eau_d2d = utility_means(matching, training.payoff.values)
    out: list[tuple[float, FrameMetrics]] = []
    for b in range(t_count // bucket):
        sl = slice(b * bucket, (b + 1) * bucket)
        cu_rates = cu_sub[:, sl].mean(axis=1)
        cu_band = cu_sub[:, sl].std(axis=1, ddof=1) / math.sqrt(bucket)
        d2d_rates = d2d_sub[:, sl].mean(axis=1)
        outage = cu_rates < cfg.r_th - 3.0 * cu_band
        wsr = float(np.sum(cfg.weights * d2d_rates))
        fm = FrameMetrics(d2d_rates, cu_rates, matching, wsr, outage,
                          eau_cu, eau_d2d, matching_switch_count=0,
                          csi_acquisition_count=matching.matched_count * bucket,
                          dma_iterations=trace.iterations if b == 0 else 0)
        out.append((b * bucket_s, fm))
    return out


@dataclass
class MetricsSummary:
    """Replication means with standard errors where they matter."""

    count: int
    wsr_mean: float
    wsr_se: float
    outage_pct: float
    outage_se: float
    eau_cu: float
    eau_d2d: float
    switch_mean: float
    csi_mean: float
    iterations_mean: float


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size <= 1:
        return float(x.mean()) if x.size else 0.0, 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def aggregate_metrics(frames: list[FrameMetrics]) -> MetricsSummary:
    if not frames:
        raise ValueError("nothing to aggregate")
    wsr = np.array([f.weighted_sum_rate for f in frames])
    out_frac = np.array([100.0 * f.outage.mean() for f in frames])
    wsr_mean, wsr_se = _mean_se(wsr)
    out_mean, out_se = _mean_se(out_frac)
    return MetricsSummary(
        count=len(frames),
        wsr_mean=wsr_mean, wsr_se=wsr_se,
        outage_pct=out_mean, outage_se=out_se,
        eau_cu=float(np.mean([f.eau_cu for f in frames])),
        eau_d2d=float(np.mean([f.eau_d2d for f in frames])),
        switch_mean=float(np.mean([f.matching_switch_count for f in frames])),
        csi_mean=float(np.mean([f.csi_acquisition_count for f in frames])),
        iterations_mean=float(np.mean([f.dma_iterations for f in frames])))
