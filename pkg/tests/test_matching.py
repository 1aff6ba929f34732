import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopd2d.matching import (DmaTrace, InvariantViolation, Matching,
                              PayoffMatrix, assignment_value, demand,
                              deviation_gain, empty_matching, marginal_gap,
                              matching_from_pairs, matching_without_transfer,
                              optimal_assignment, optimal_matching,
                              optimal_value_without, random_matching, run_dma,
                              verify_eps_stable)


def brute_force_optimal(vals):
    """Exact optimum by enumerating every partial assignment (small only)."""
    m_count, n_count = vals.shape
    best = 0.0
    rows = range(m_count)
    for k in range(0, min(m_count, n_count) + 1):
        for rsub in itertools.combinations(rows, k):
            for csub in itertools.permutations(range(n_count), k):
                total = sum(vals[m, n] for m, n in zip(rsub, csub))
                best = max(best, total)
    return best


def matrices(max_dim=5, lo=-5.0, hi=10.0):
    side = st.integers(1, max_dim)
    return side.flatmap(lambda m: side.flatmap(lambda n: st.lists(
        st.lists(st.floats(lo, hi, allow_nan=False, width=32),
                 min_size=n, max_size=n),
        min_size=m, max_size=m))).map(lambda x: np.array(x, dtype=float))


def test_demand_examples():
    v = np.array([[5.0], [3.0]])
    assert demand(0, [0.0, 0.0], v) == 0
    assert demand(0, [3.5, 0.0], v) == 1
    assert demand(0, [6.0, 4.0], v) is None
    # exact tie resolves to the lowest CU index
    assert demand(0, [0.0, 0.0], np.array([[4.0], [4.0]])) == 0
    with pytest.raises(ValueError):
        demand(0, [-1.0, 0.0], v)


def test_dma_single_pair_trace():
    m, trace = run_dma(np.array([[5.0]]), 1.0)
    assert trace.iterations == 2
    assert m.pairs() == [(0, 0)]
    assert m.price_steps[0] == 0
    assert m.dp_utilities(np.array([[5.0]]))[0] == pytest.approx(5.0)
    assert [list(b) for b in trace.beta_history] == [[0.0], [0.0]]
    assert [list(c) for c in trace.proposal_counts] == [[1], [0]]


def test_dma_contention_trace():
    # two pairs for one CU at unit eps: requirement climbs to 4 and the
    # better pair wins there
    v = np.array([[5.0, 3.0]])
    m, trace = run_dma(v, 1.0)
    assert trace.iterations == 6
    assert m.pairs() == [(0, 0)]
    assert m.price_steps[0] == 4
    assert list(m.dp_utilities(v)) == pytest.approx([1.0, 0.0])
    assert [b[0] for b in trace.beta_history] == [0, 1, 2, 3, 4, 4]
    assert [c[0] for c in trace.proposal_counts] == [2, 2, 2, 2, 1, 0]


def test_dma_all_negative_is_empty():
    m, trace = run_dma(np.array([[-2.0, -1.0]]), 0.5)
    assert m.pairs() == []
    assert m.eps == 0.5
    assert trace.iterations == 0


def test_dma_rejects_bad_inputs():
    with pytest.raises(ValueError):
        run_dma(np.array([[1.0]]), 0.0)
    with pytest.raises(ValueError):
        run_dma(np.array([np.nan])[None, :], 1.0)
    with pytest.raises(ValueError):
        run_dma(np.zeros((0, 2)), 1.0)


def test_dma_square_all_matched():
    v = np.array([[4.0, 1.0], [1.0, 4.0]])
    m, _ = run_dma(v, 0.25)
    assert sorted(m.pairs()) == [(0, 0), (1, 1)]


def test_dma_selector_deterministic():
    v = np.array([[3.0, 3.0, 3.0], [2.9, 2.9, 2.9]])
    a, _ = run_dma(v, 0.5, np.random.default_rng(5))
    b, _ = run_dma(v, 0.5, np.random.default_rng(5))
    assert np.array_equal(a.cu_partner, b.cu_partner)
    assert np.array_equal(a.price_steps, b.price_steps)


def test_optimal_assignment_against_enumeration():
    rng = np.random.default_rng(77)
    for _ in range(200):
        m_count = int(rng.integers(1, 5))
        n_count = int(rng.integers(1, 5))
        vals = rng.uniform(-5.0, 10.0, (m_count, n_count))
        pairs, value = optimal_assignment(vals)
        assert value == pytest.approx(brute_force_optimal(vals), abs=1e-9)
        assert all(vals[m, n] > 0 for m, n in pairs)
        assert len({m for m, _ in pairs}) == len(pairs)
        assert len({n for _, n in pairs}) == len(pairs)


def test_optimal_assignment_all_negative():
    pairs, value = optimal_assignment(np.array([[-1.0, -2.0]]))
    assert pairs == [] and value == 0.0


def test_optimal_value_without():
    v = np.array([[5.0, 3.0], [2.0, 4.0]])
    assert optimal_value_without(v) == 9.0
    assert optimal_value_without(v, drop_dps=[1]) == 5.0
    assert optimal_value_without(v, drop_cus=[0]) == 4.0
    assert optimal_value_without(v, drop_cus=[0, 1]) == 0.0


def test_no_transfer_prefers_value_order():
    # both pairs want CU1; pair 1 wins it and pair 0 settles for CU0
    v = np.array([[1.0, 2.0], [3.0, 5.0]])
    m = matching_without_transfer(v)
    assert sorted(m.pairs()) == [(0, 1), (1, 0)]
    assert assignment_value(v, m) == 5.0


def test_no_transfer_first_come_locks_in():
    # CU0 accepts pair 0 in round one and refuses the rest; pair 1 falls
    # through to CU1 despite the zero value
    v = np.array([[9.0, 9.0], [0.0, 0.0]])
    m = matching_without_transfer(v)
    assert sorted(m.pairs()) == [(0, 0), (1, 1)]
    assert assignment_value(v, m) == 9.0


def test_no_transfer_rejects_negative():
    assert matching_without_transfer(np.array([[-1.0]])).pairs() == []


def test_no_transfer_no_mutually_acceptable_unmatched():
    rng = np.random.default_rng(4)
    for _ in range(100):
        vals = rng.uniform(-5.0, 10.0, (int(rng.integers(1, 6)),
                                        int(rng.integers(1, 6))))
        m = matching_without_transfer(vals, rng)
        free_cu = np.nonzero(m.cu_partner < 0)[0]
        free_dp = np.nonzero(m.dp_partner < 0)[0]
        for mm in free_cu:
            for nn in free_dp:
                assert vals[mm, nn] < 0
        for mm, nn in m.pairs():
            assert vals[mm, nn] >= 0


def test_random_matching_size_and_uniformity():
    v = np.zeros((1, 3))
    rng = np.random.default_rng(0)
    counts = np.zeros(3)
    for _ in range(3000):
        m = random_matching(v, rng)
        assert m.matched_count == 1
        counts[m.cu_partner[0]] += 1
    # 5 sigma around 1000 for a fair three-way choice
    assert np.all(np.abs(counts - 1000.0) < 130.0)


def test_random_matching_ignores_sign():
    m = random_matching(np.array([[-3.0, -9.0]]), np.random.default_rng(1))
    assert m.matched_count == 1


def test_random_matching_wide_and_tall():
    rng = np.random.default_rng(2)
    assert random_matching(np.zeros((2, 5)), rng).matched_count == 2
    assert random_matching(np.zeros((5, 2)), rng).matched_count == 2


def test_matching_validation():
    with pytest.raises(ValueError):
        Matching(np.array([0]), np.array([-1]), np.array([0]), 1.0)
    with pytest.raises(ValueError):
        Matching(np.array([-1]), np.array([-1]), np.array([2]), 1.0)
    with pytest.raises(ValueError):
        Matching(np.array([0]), np.array([0]), np.array([-1]), 1.0)


def test_empty_matching_shape():
    m = empty_matching(2, 3)
    assert m.matched_count == 0
    assert list(m.prices) == [0.0, 0.0]
    assert list(m.dp_utilities(np.zeros((2, 3)))) == [0.0, 0.0, 0.0]


def test_matching_from_pairs_round_trip():
    m = matching_from_pairs(3, 2, [(2, 0), (0, 1)])
    assert m.cu_partner[2] == 0 and m.dp_partner[0] == 2
    assert m.cu_partner[0] == 1 and m.dp_partner[1] == 0
    assert m.cu_partner[1] == -1


def test_verify_eps_stable_flags_blocking_pair():
    m = empty_matching(1, 1)
    report = verify_eps_stable(np.array([[10.0]]), m, 1.0)
    assert not report.stable
    assert report.violations[0][0] == "blocking"


def test_verify_eps_stable_accepts_optimal_with_big_eps():
    v = np.array([[5.0, 3.0], [2.0, 4.0]])
    m = optimal_matching(v)
    assert verify_eps_stable(v, m, 10.0).stable


def test_dma_trace_csv_rows():
    _, trace = run_dma(np.array([[5.0, 3.0]]), 1.0)
    rows = list(trace.csv_rows())
    assert len(rows) == trace.iterations * 1
    assert rows[0] == (1, 0, 0.0, 2)
    ts = [r[0] for r in rows]
    assert ts == sorted(ts)


def test_deviation_gain_truthful_is_zero():
    v = np.array([[5.0, 3.0], [2.0, 4.0]])
    for n in range(2):
        assert deviation_gain(v, n, v[:, n], 1.0) == 0.0


def test_deviation_gain_validates_shape():
    with pytest.raises(ValueError):
        deviation_gain(np.array([[1.0]]), 0, np.array([1.0, 2.0]), 1.0)


def test_marginal_gap_hand_case():
    v = np.array([[5.0, 3.0]])
    m, _ = run_dma(v, 1.0)
    # optimum 5, optimum without pair 0 is 3, realized utility 1
    assert marginal_gap(v, m, 0) == pytest.approx(1.0)
    # pair 1 contributes nothing at the optimum and holds utility 0
    assert marginal_gap(v, m, 1) == pytest.approx(0.0)


def test_payoff_matrix_validation():
    with pytest.raises(ValueError):
        PayoffMatrix(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        PayoffMatrix(np.array([[1.0, np.inf]]))
    with pytest.raises(ValueError):
        PayoffMatrix(np.array([[1.0, 2.0]]), np.array([1.0, -1.0]))
    pm = PayoffMatrix(np.array([[1.0, 2.0]]))
    assert pm.m_count == 1 and pm.n_count == 2
    assert np.allclose(pm.weights, 1.0)


def test_run_dma_accepts_payoff_matrix():
    pm = PayoffMatrix(np.array([[5.0]]))
    m, _ = run_dma(pm, 1.0)
    assert m.pairs() == [(0, 0)]


@settings(max_examples=150)
@given(matrices(), st.sampled_from([0.25, 1.0, 2.0]))
def test_dma_always_eps_stable(vals, eps):
    m, _ = run_dma(vals, eps)
    assert verify_eps_stable(vals, m, eps).stable


@settings(max_examples=150)
@given(matrices(), st.sampled_from([0.25, 1.0, 2.0]))
def test_dma_near_optimal(vals, eps):
    m, _ = run_dma(vals, eps)
    _, best = optimal_assignment(vals)
    bound = eps * min(vals.shape)
    assert assignment_value(vals, m) >= best - bound - 1e-9


@settings(max_examples=150)
@given(matrices(), st.sampled_from([0.25, 1.0, 2.0]))
def test_dma_invariants(vals, eps):
    m, trace = run_dma(vals, eps)
    v_max = float(vals.max())
    # matched pairs are individually rational on both sides
    for mm, nn in m.pairs():
        assert vals[mm, nn] >= 0.0
    assert np.all(m.price_steps >= 0)
    if v_max > 0:
        cap = math.ceil(vals.size * v_max / eps) + vals.size
        assert trace.iterations <= cap
        assert np.all(m.prices <= v_max + 1e-9)
    # requirements never fall
    for prev, nxt in zip(trace.beta_history, trace.beta_history[1:]):
        assert np.all(nxt >= prev)


@settings(max_examples=100)
@given(matrices(max_dim=4), st.sampled_from([0.5, 1.0]))
def test_dma_scale_equivariance(vals, eps):
    # doubling twice is exact in floats, so outcomes must match step for step
    a, _ = run_dma(vals, eps)
    b, _ = run_dma(4.0 * vals, 4.0 * eps)
    assert np.array_equal(a.cu_partner, b.cu_partner)
    assert np.array_equal(a.price_steps, b.price_steps)


@settings(max_examples=100)
@given(matrices(max_dim=4), st.sampled_from([0.5, 2.0]))
def test_marginal_gap_lemma_bound(vals, eps):
    m, _ = run_dma(vals, eps)
    m_count, n_count = vals.shape
    c1 = min(m_count, n_count - 1) if n_count > 1 else 0
    c2 = min(m_count, n_count)
    bound = max(4 * c1, c1 + c2 + 1) * eps
    for n in range(n_count):
        assert marginal_gap(vals, m, n) <= bound + 1e-9
