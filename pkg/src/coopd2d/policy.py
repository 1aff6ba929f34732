"""Per-subframe cooperation policy for one CU / D2D pair.

Each subframe goes to either the cellular uplink or the D2D link. Over a
state distribution the optimal rule is a ratio threshold: give the
subframe to the D2D link when r_d exceeds lambda * r_c, to the CU when it
falls short, and split boundary states with a fixed share chosen so the
CU's average-rate floor binds exactly. The solver picks the smallest
threshold whose covered cellular mass reaches the floor; the D2D average
under that rule is the pair's long-term payoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import EmpiricalStateSet

# Relative tolerance for deciding that a state sits on the threshold.
RATIO_RTOL = 1e-12


@dataclass(frozen=True)
class ThresholdPolicy:
    """Ratio threshold plus the D2D share applied on boundary states."""

    lambda_star: float
    alpha_tie: float

    def __post_init__(self) -> None:
        if self.lambda_star < 0:
            raise ValueError("threshold must be nonnegative")
        if not 0.0 <= self.alpha_tie <= 1.0:
            raise ValueError("tie share must lie in [0, 1]")


@dataclass(frozen=True)
class PolicyOutcome:
    d2d_rate: float
    cu_rate: float
    feasible: bool = True


def classify_states(r_c, r_d, lam, rtol=RATIO_RTOL):
    """Split states into cellular / boundary / d2d sets at threshold lam.

    Returns boolean masks (cellular, boundary, d2d). States with both
    rates zero are idle either way and are filed under cellular.
    """
    r_c = np.asarray(r_c, dtype=float)
    r_d = np.asarray(r_d, dtype=float)
    lhs = lam * r_c
    scale = np.maximum(r_d, lhs)
    tie = np.abs(r_d - lhs) <= rtol * scale
    below = (lhs > r_d) & ~tie
    above = (r_d > lhs) & ~tie
    idle = (r_c == 0) & (r_d == 0)
    below = below | (tie & idle)
    tie = tie & ~idle
    return below, tie, above


def coverage_value(states: EmpiricalStateSet, lam: float) -> float:
    """Expected cellular rate over states the threshold assigns to the CU,
    counting boundary states fully: E{r_c * 1[lam * r_c >= r_d]}."""
    keep = lam * states.r_c >= states.r_d
    return float(np.sum(states.weights * states.r_c * keep))


def _ratios(r_c, r_d):
    """Breakpoint ratio r_d / r_c per state; +inf when only r_d is live."""
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(r_c > 0, r_d / np.where(r_c > 0, r_c, 1.0),
                       np.where(r_d > 0, np.inf, 0.0))
    return rho


def solve_threshold_batch(r_c, r_d, weights, r_th):
    """Vectorized threshold solve over rows of (r_c, r_d, weights).

    Inputs are (P, K) arrays; each row is one state set. Returns arrays
    (feasible, lambda_star, alpha_tie, payoff) of length P. Entries of
    infeasible rows are zero except payoff, which is set to -1.
    """
    r_c = np.asarray(r_c, dtype=float)
    r_d = np.asarray(r_d, dtype=float)
    weights = np.asarray(weights, dtype=float)
    p, _ = r_c.shape
    rows = np.arange(p)

    if r_th == 0.0:
        # Any threshold covers a zero floor; the whole subframe goes D2D.
        payoff = np.sum(weights * r_d, axis=1)
        return (np.ones(p, bool), np.zeros(p), np.ones(p), payoff)

    rho = _ratios(r_c, r_d)
    order = np.argsort(rho, axis=1, kind="stable")
    rho_s = np.take_along_axis(rho, order, axis=1)
    mass_s = np.take_along_axis(weights * r_c, order, axis=1)
    gain_s = np.take_along_axis(weights * r_d, order, axis=1)
    cum = np.cumsum(mass_s, axis=1)

    # Feasibility from the unsorted sum: closer to the true mean than the
    # sequential cumsum, which can round a knife-edge set the wrong way.
    feasible = np.sum(weights * r_c, axis=1) >= r_th
    crossed = cum >= r_th
    has_cross = np.any(crossed, axis=1)
    # A feasible row whose cumsum never crosses (rounding) covers all of
    # its finite-ratio states; point at the largest finite ratio.
    finite_last = np.maximum(
        np.sum(np.isfinite(rho_s), axis=1) - 1, 0)
    j = np.where(has_cross, np.argmax(crossed, axis=1), finite_last)
    lam = rho_s[rows, j]
    lam = np.where(feasible, lam, 0.0)

    lam_col = lam[:, None]
    tol = RATIO_RTOL * np.maximum(rho_s, lam_col)
    with np.errstate(invalid="ignore"):
        tie = np.isfinite(rho_s) & (np.abs(rho_s - lam_col) <= tol)
    below = (rho_s < lam_col) & ~tie
    above = ~below & ~tie

    below_mass = np.sum(mass_s, axis=1, where=below)
    tie_mass = np.sum(mass_s, axis=1, where=tie)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = 1.0 - (r_th - below_mass) / tie_mass
    alpha = np.where(tie_mass > 0, alpha, 1.0)
    alpha = np.clip(alpha, 0.0, 1.0)

    payoff = np.sum(gain_s, axis=1, where=above) + alpha * np.sum(
        gain_s, axis=1, where=tie)

    alpha = np.where(feasible, alpha, 0.0)
    payoff = np.where(feasible, payoff, -1.0)
    return feasible, lam, alpha, payoff


def _solve_exact(states: EmpiricalStateSet, r_th: float):
    feas, lam, alpha, _ = solve_threshold_batch(
        states.r_c[None, :], states.r_d[None, :], states.weights[None, :], r_th)
    if not feas[0]:
        return None
    return ThresholdPolicy(float(lam[0]), float(alpha[0]))


def _solve_bisection(states: EmpiricalStateSet, r_th: float, eps0: float):
    total = float(np.sum(states.weights * states.r_c))
    if total < r_th:
        return None
    if r_th == 0.0:
        return ThresholdPolicy(0.0, 1.0)

    rho = _ratios(states.r_c, states.r_d)
    finite = rho[np.isfinite(rho)]
    lam_lo = 0.0
    lam_hi = float(finite.max()) + 1.0 if finite.size else 1.0
    while lam_hi - lam_lo > eps0:
        mid = 0.5 * (lam_lo + lam_hi)
        if coverage_value(states, mid) <= r_th:
            lam_lo = mid
        else:
            lam_hi = mid

    # Snap to the breakpoint inside the final bracket; the floor is met
    # exactly there, which a midpoint between breakpoints cannot do.
    # Candidates are accepted with the same tie-tolerant classification
    # used at evaluation time: the raw product test lam * r_c >= r_d can
    # round a boundary state out and skip right past the breakpoint.
    pad = RATIO_RTOL * max(1.0, lam_hi)
    cands = np.concatenate(([0.0], np.unique(finite)))
    cands = cands[(cands >= lam_lo - pad) & (cands <= lam_hi + pad)]
    mass = states.weights * states.r_c
    lam = None
    for c in np.sort(cands):
        below, tie, _ = classify_states(states.r_c, states.r_d, float(c))
        if float(np.sum(mass, where=below | tie)) >= r_th:
            lam = float(c)
            break
    if lam is None:
        lam = 0.5 * (lam_lo + lam_hi)

    below, tie, _ = classify_states(states.r_c, states.r_d, lam)
    below_mass = float(np.sum(states.weights * states.r_c, where=below))
    tie_mass = float(np.sum(states.weights * states.r_c, where=tie))
    if tie_mass > 0:
        alpha = 1.0 - (r_th - below_mass) / tie_mass
    else:
        alpha = 1.0
    return ThresholdPolicy(lam, float(np.clip(alpha, 0.0, 1.0)))


def solve_policy(states: EmpiricalStateSet, r_th: float, method: str = "exact",
                 eps0: float = 1e-9):
    """Solve for the optimal threshold policy, or None when no policy can
    reach the CU rate floor (the set's mean cellular rate is below r_th).

    ``exact`` scans sorted breakpoint ratios; ``bisection`` brackets the
    threshold iteratively to tolerance ``eps0`` and is retained as an
    independent cross-check.
    """
    if r_th < 0:
        raise ValueError("rate floor must be nonnegative")
    if method == "exact":
        return _solve_exact(states, r_th)
    if method == "bisection":
        return _solve_bisection(states, r_th, eps0)
    raise ValueError(f"unknown method: {method!r}")


def evaluate_policy(states: EmpiricalStateSet,
                    policy: ThresholdPolicy) -> PolicyOutcome:
    """Average D2D and cellular rates of a threshold policy over a set."""
    below, tie, above = classify_states(states.r_c, states.r_d,
                                        policy.lambda_star)
    pi = above * 1.0 + tie * policy.alpha_tie
    d2d = float(np.sum(states.weights * pi * states.r_d))
    cu = float(np.sum(states.weights * (1.0 - pi) * states.r_c))
    return PolicyOutcome(d2d, cu, True)


def pair_payoff(states: EmpiricalStateSet, r_th: float, w: float):
    """Long-term D2D payoff u and weighted payoff v = w * u for one pair.

    An infeasible pair (rate floor unreachable) yields u = -1, marking it
    unacceptable in the matching stage.
    """
    if w <= 0:
        raise ValueError("weight must be strictly positive")
    feas, _, _, payoff = solve_threshold_batch(
        states.r_c[None, :], states.r_d[None, :], states.weights[None, :], r_th)
    u = float(payoff[0]) if feas[0] else -1.0
    return u, w * u


def weighted_sum_condition(states: EmpiricalStateSet, eta: float,
                           r_th: float) -> bool:
    """Sufficient condition for the threshold policy to also maximize the
    weighted sum eta * cellular + D2D over this state set:
    Pr{r_d > eta * r_c} > 1 - r_th**2 / E{r_c**2}."""
    prob = float(np.sum(states.weights * (states.r_d > eta * states.r_c)))
    e2 = float(np.sum(states.weights * states.r_c ** 2))
    if e2 == 0.0:
        return r_th > 0.0
    return prob > 1.0 - r_th ** 2 / e2
