"""One-to-one assignment of D2D pairs to CU channels with transfer prices.

The central solver is a distributed ascending auction: unmatched D2D
pairs repeatedly propose to the CU giving them the best surplus at the
posted price requirements, and each CU resolves its proposals per round:

* silence after a contested round: accept one held-over proposer at the
  previous, lower requirement;
* a single proposal it can improve on: accept at the current requirement;
* contention: unmatch, hold the incumbent's claim over, raise the
  requirement by the price step.

Prices live on the grid {0, eps, 2*eps, ...} and are stored as integer
step counters. The result is always eps-stable and within
eps * min(M, N) of the exact optimum, which is also provided here via a
Hungarian solver for comparison, along with two price-free baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


class InvariantViolation(RuntimeError):
    """A property that must hold by construction failed at runtime."""


def _values(v) -> np.ndarray:
    if isinstance(v, PayoffMatrix):
        return v.values
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("payoff values must form a nonempty 2-d matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError("payoff values must be finite")
    return arr


@dataclass
class PayoffMatrix:
    """Weighted pair payoffs v[m, n] plus the per-D2D weights behind them."""

    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.size == 0:
            raise ValueError("values must form a nonempty 2-d matrix")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        n = self.values.shape[1]
        if self.weights is None:
            self.weights = np.ones(n)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (n,) or np.any(self.weights <= 0):
                raise ValueError("weights must be positive, one per D2D pair")

    @property
    def m_count(self) -> int:
        return self.values.shape[0]

    @property
    def n_count(self) -> int:
        return self.values.shape[1]


@dataclass
class Matching:
    """Partial one-to-one matching with per-CU prices on the eps grid."""

    cu_partner: np.ndarray   # (M,) D2D index, -1 when unmatched
    dp_partner: np.ndarray   # (N,) CU index, -1 when unmatched
    price_steps: np.ndarray  # (M,) price = steps * eps
    eps: float

    def __post_init__(self) -> None:
        self.cu_partner = np.asarray(self.cu_partner, dtype=np.int64)
        self.dp_partner = np.asarray(self.dp_partner, dtype=np.int64)
        self.price_steps = np.asarray(self.price_steps, dtype=np.int64)
        if self.price_steps.shape != self.cu_partner.shape:
            raise ValueError("need one price per CU")
        if np.any(self.price_steps < 0):
            raise ValueError("prices must be nonnegative")
        for m, n in enumerate(self.cu_partner):
            if n >= 0 and self.dp_partner[n] != m:
                raise ValueError("partner arrays disagree")
        for n, m in enumerate(self.dp_partner):
            if m >= 0 and self.cu_partner[m] != n:
                raise ValueError("partner arrays disagree")
        if np.any(self.price_steps[self.cu_partner < 0] != 0):
            raise ValueError("unmatched CUs must carry price zero")

    @property
    def prices(self) -> np.ndarray:
        return self.price_steps * self.eps

    def pairs(self) -> list[tuple[int, int]]:
        return [(m, int(n)) for m, n in enumerate(self.cu_partner) if n >= 0]

    @property
    def matched_count(self) -> int:
        return int(np.count_nonzero(self.cu_partner >= 0))

    def cu_utilities(self) -> np.ndarray:
        """Per-CU utility: the price received (zero when unmatched)."""
        return self.prices

    def dp_utilities(self, v) -> np.ndarray:
        """Per-D2D utility: matched value minus price paid, else zero."""
        vals = _values(v)
        out = np.zeros(len(self.dp_partner))
        for m, n in self.pairs():
            out[n] = vals[m, n] - self.price_steps[m] * self.eps
        return out


def empty_matching(m_count: int, n_count: int) -> Matching:
    return Matching(np.full(m_count, -1), np.full(n_count, -1),
                    np.zeros(m_count, dtype=np.int64), 0.0)


def matching_from_pairs(m_count: int, n_count: int, pairs) -> Matching:
    """Zero-price Matching from an explicit list of (cu, dp) pairs."""
    cu = np.full(m_count, -1)
    dp = np.full(n_count, -1)
    for m, n in pairs:
        cu[m] = n
        dp[n] = m
    return Matching(cu, dp, np.zeros(m_count, dtype=np.int64), 0.0)


@dataclass
class DmaTrace:
    """Round-by-round record of one auction run.

    ``beta_history`` holds the broadcast price requirements per round,
    ``proposal_counts`` the raw per-CU proposal tallies, ``proposals``
    the raw (dp, cu) proposals as sent.
    """

    iterations: int = 0
    beta_history: list = field(default_factory=list)
    proposal_counts: list = field(default_factory=list)
    proposals: list = field(default_factory=list)

    def csv_rows(self):
        """Yield (iteration, cu, beta, proposer_count) rows, 1-based rounds."""
        for t, (beta, counts) in enumerate(zip(self.beta_history,
                                               self.proposal_counts), start=1):
            for m in range(len(beta)):
                yield t, m, float(beta[m]), int(counts[m])


def demand(n: int, beta, v) -> int | None:
    """Index of D2D pair n's favorite CU at price requirements ``beta``,
    breaking ties toward the lowest index, or None when every CU would
    leave it a negative surplus."""
    vals = _values(v)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise ValueError("price requirements must be nonnegative")
    surplus = vals[:, n] - beta
    m = int(np.argmax(surplus))
    return m if surplus[m] >= 0 else None


def run_dma(v, eps: float, selector: np.random.Generator | None = None,
            record_trace: bool = True) -> tuple[Matching, DmaTrace]:
    """Run the ascending auction to an eps-stable matching.

    ``selector`` resolves the one random choice in the protocol (which
    held-over proposer a silent CU accepts); None picks the lowest index.
    The returned matching is verified eps-stable and the round count is
    checked against the ceil(M*N*Vmax/eps) + M*N cap; either failure
    raises InvariantViolation.
    """
    vals = _values(v)
    if eps <= 0:
        raise ValueError("price step must be strictly positive")
    m_count, n_count = vals.shape
    v_max = float(vals.max())
    if v_max <= 0:
        # Nobody can gain from matching; the empty outcome is stable as is.
        out = Matching(np.full(m_count, -1), np.full(n_count, -1),
                       np.zeros(m_count, dtype=np.int64), eps)
        return out, DmaTrace()
    cap = math.ceil(m_count * n_count * v_max / eps) + m_count * n_count

    # Hot loop on plain lists; the numpy scalar-access tax would dominate
    # otherwise (big sweeps run tens of millions of rounds).
    cols = vals.T.tolist()             # cols[n][m]
    beta = [0] * m_count               # requirement, in price steps
    beta_eps = [0.0] * m_count
    prev_beta = list(beta)
    price = [0] * m_count
    mu_cu = [-1] * m_count
    mu_dp = [-1] * n_count
    prev_demand = [-1] * n_count       # proposals held over from last round

    # A pair's favorite CU only changes when that CU's requirement moves,
    # so demands are cached and recomputed selectively.
    cached = [-1] * n_count
    cache_ok = [False] * n_count

    trace = DmaTrace()
    t = 0
    while True:
        t += 1
        if t > cap:
            raise InvariantViolation("auction round cap exceeded")
        beta_t = list(beta)

        # Proposal stage: every unmatched pair asks for its best surplus.
        cur = [-1] * n_count
        counts = [0] * m_count
        raw_proposals = 0
        for n in range(n_count):
            if mu_dp[n] >= 0:
                continue
            if not cache_ok[n]:
                col = cols[n]
                best = -1
                best_s = 0.0
                for m in range(m_count):
                    s = col[m] - beta_eps[m]
                    if s >= 0.0 and (best < 0 or s > best_s):
                        best = m
                        best_s = s
                cached[n] = best
                cache_ok[n] = True
            target = cached[n]
            if target >= 0:
                cur[n] = target
                counts[target] += 1
                raw_proposals += 1

        if record_trace:
            trace.beta_history.append(np.array(beta_eps))
            trace.proposal_counts.append(np.array(counts))
            trace.proposals.append(
                [(n, cur[n]) for n in range(n_count) if cur[n] >= 0])

        # Stage one: a CU whose proposals just dried up takes a held-over
        # proposer at the previous requirement, cancelling that pair's
        # fresh proposal elsewhere.
        for m in range(m_count):
            if counts[m] == 0 and mu_cu[m] < 0:
                cands = [n for n in range(n_count) if prev_demand[n] == m]
                if not cands:
                    continue
                if selector is None or len(cands) == 1:
                    n_star = cands[0]
                else:
                    n_star = int(selector.choice(cands))
                mu_cu[m] = n_star
                mu_dp[n_star] = m
                price[m] = prev_beta[m]
                fresh = cur[n_star]
                if fresh >= 0:
                    cur[n_star] = -1
                    counts[fresh] -= 1

        # Stage two: acceptances, contention and price raises.
        for m in range(m_count):
            c = counts[m]
            if c == 0:
                continue
            if c == 1 and (mu_cu[m] < 0 or price[m] < beta_t[m]):
                n_star = cur.index(m)
                old = mu_cu[m]
                if old >= 0:
                    mu_dp[old] = -1
                    cache_ok[old] = False
                mu_cu[m] = n_star
                mu_dp[n_star] = m
                price[m] = beta_t[m]
            else:
                incumbent = mu_cu[m]
                if incumbent >= 0:
                    mu_cu[m] = -1
                    mu_dp[incumbent] = -1
                    cache_ok[incumbent] = False
                    if price[m] == beta_t[m]:
                        cur[incumbent] = m  # held over for a quiet round
                    price[m] = 0
                beta[m] = beta_t[m] + 1
                beta_eps[m] = beta[m] * eps
                for n in range(n_count):
                    if cached[n] == m:
                        cache_ok[n] = False

        prev_demand = cur
        prev_beta = beta_t
        if raw_proposals == 0:
            break

    trace.iterations = t
    matching = Matching(np.array(mu_cu, dtype=np.int64),
                        np.array(mu_dp, dtype=np.int64),
                        np.array(price, dtype=np.int64), eps)
    report = verify_eps_stable(vals, matching, eps)
    if not report.stable:
        raise InvariantViolation(
            f"auction produced an unstable matching: {report.violations[:3]}")
    return matching, trace


@dataclass
class StabilityReport:
    stable: bool
    violations: list


def verify_eps_stable(v, matching: Matching, eps: float,
                      tol: float = 1e-9) -> StabilityReport:
    """Check individual rationality and the eps-blocking condition.

    ``tol`` absorbs float roundoff only; prices on the eps grid keep the
    checks otherwise exact.
    """
    vals = _values(v)
    theta = matching.cu_utilities()
    delta = matching.dp_utilities(vals)
    violations: list = []
    for m in np.nonzero(theta < -tol)[0]:
        violations.append(("cu_rationality", int(m), float(theta[m])))
    for n in np.nonzero(delta < -tol)[0]:
        violations.append(("dp_rationality", int(n), float(delta[n])))
    slack = theta[:, None] + delta[None, :] - (vals - eps)
    for m, n in zip(*np.nonzero(slack < -tol)):
        violations.append(("blocking", int(m), int(n), float(slack[m, n])))
    return StabilityReport(not violations, violations)


def optimal_assignment(v) -> tuple[list[tuple[int, int]], float]:
    """Maximum-value partial assignment via the Hungarian method.

    Pairs with nonpositive value are left unmatched; dropping them never
    lowers the total.
    """
    vals = _values(v)
    rows, cols = linear_sum_assignment(np.maximum(vals, 0.0), maximize=True)
    pairs = [(int(m), int(n)) for m, n in zip(rows, cols) if vals[m, n] > 0]
    value = float(sum(vals[m, n] for m, n in pairs))
    return pairs, value


def optimal_matching(v) -> Matching:
    """`optimal_assignment` packaged as a zero-price Matching."""
    vals = _values(v)
    pairs, _ = optimal_assignment(vals)
    return matching_from_pairs(vals.shape[0], vals.shape[1], pairs)


def optimal_value_without(v, drop_cus=(), drop_dps=()) -> float:
    """Optimal assignment value after removing the given CUs / D2D pairs."""
    vals = _values(v)
    if len(drop_cus):
        vals = np.delete(vals, list(drop_cus), axis=0)
    if len(drop_dps):
        vals = np.delete(vals, list(drop_dps), axis=1)
    if vals.size == 0:
        return 0.0
    _, value = optimal_assignment(vals)
    return value


def assignment_value(v, matching: Matching) -> float:
    """Total payoff of the matched pairs."""
    vals = _values(v)
    return float(sum(vals[m, n] for m, n in matching.pairs()))


def matching_without_transfer(v, selector: np.random.Generator | None = None
                              ) -> Matching:
    """Price-free deferred acceptance.

    Each round every unmatched pair proposes to its best acceptable CU
    (value >= 0) that has not refused it yet; a CU accepts the first
    proposal it ever receives and refuses everything after. ``selector``
    picks among same-round proposals to a free CU; None takes the lowest
    pair index.
    """
    vals = _values(v)
    m_count, n_count = vals.shape
    # Preference walks: acceptable CUs, best value first, index-ordered ties.
    prefs = [sorted(np.nonzero(vals[:, n] >= 0)[0],
                    key=lambda m: (-vals[m, n], m)) for n in range(n_count)]
    cursor = [0] * n_count
    cu = np.full(m_count, -1)
    dp = np.full(n_count, -1)
    while True:
        proposals: dict[int, list[int]] = {}
        for n in range(n_count):
            if dp[n] >= 0 or cursor[n] >= len(prefs[n]):
                continue
            proposals.setdefault(prefs[n][cursor[n]], []).append(n)
        if not proposals:
            break
        for m, cands in proposals.items():
            if cu[m] < 0:
                if selector is None or len(cands) == 1:
                    winner = cands[0]
                else:
                    winner = int(selector.choice(cands))
                cu[m] = winner
                dp[winner] = m
                cands = [n for n in cands if n != winner]
            for n in cands:
                cursor[n] += 1
    return Matching(cu, dp, np.zeros(m_count, dtype=np.int64), 0.0)


def random_matching(v, stream: np.random.Generator) -> Matching:
    """Uniformly random pairing of min(M, N) pairs, blind to the payoffs."""
    vals = _values(v)
    m_count, n_count = vals.shape
    pairs: list[tuple[int, int]]
    if m_count <= n_count:
        targets = stream.permutation(n_count)[:m_count]
        pairs = [(m, int(n)) for m, n in enumerate(targets)]
    else:
        targets = stream.permutation(m_count)[:n_count]
        pairs = [(int(m), n) for n, m in enumerate(targets)]
    return matching_from_pairs(m_count, n_count, pairs)


def deviation_gain(v, n: int, v_fake, eps: float,
                   selector: np.random.Generator | None = None) -> float:
    """Change in pair n's true utility when it misreports its value vector.

    Runs the auction once truthfully and once with column n replaced by
    ``v_fake``; utilities in both outcomes are computed from true values.
    """
    vals = _values(v)
    v_fake = np.asarray(v_fake, dtype=float)
    if v_fake.shape != (vals.shape[0],):
        raise ValueError("misreport must provide one value per CU")
    honest, _ = run_dma(vals, eps, selector, record_trace=False)
    gain_honest = float(honest.dp_utilities(vals)[n])
    twisted = vals.copy()
    twisted[:, n] = v_fake
    bent, _ = run_dma(twisted, eps, selector, record_trace=False)
    m = int(bent.dp_partner[n])
    gain_bent = float(vals[m, n] - bent.prices[m]) if m >= 0 else 0.0
    return gain_bent - gain_honest


def marginal_gap(v, matching: Matching, n: int) -> float:
    """|V(M, N) - V(M, N without n) - delta_n|: how far pair n's auction
    utility sits from its marginal contribution to the optimum."""
    vals = _values(v)
    _, full = optimal_assignment(vals)
    without = optimal_value_without(vals, drop_dps=[n])
    delta = float(matching.dp_utilities(vals)[n])
    return abs(full - without - delta)
