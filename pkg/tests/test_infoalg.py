import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardsde.infoalg import (
    BudgetExceeded,
    Strategy,
    average_case_error,
    baseline_trace,
    brute_force_min_avg_error,
    catalog_nodes,
    equidistant_nodes,
    fixed_node_rule,
    gauss_nodes,
    midpoint_nodes,
    random_node_rule,
    run_strategy,
)


def adaptive_rule(n, start=0.25):
    """Node 1 is ``start``; node k+1 is answer k."""
    return Strategy(
        next_node=lambda answers, omega: answers[-1] if answers else start,
        stop_rule=lambda g, omega: n,
        estimator=lambda answers, omega: float(sum(answers)),
        name="echo",
    )


# -- run_strategy ------------------------------------------------------------

def test_constant_estimator():
    s = fixed_node_rule([0.1, 0.2, 0.3, 0.4])
    est, tr = run_strategy(lambda x: x * 100, s)
    assert est == 0.0 and tr.count == 4


def test_identity_answers():
    s = fixed_node_rule([0.3, 0.1, 0.7])
    _, tr = run_strategy(lambda x: x, s)
    assert tr.answers == [0.3, 0.1, 0.7]
    assert tr.nodes == tr.answers


def test_adaptive_node_is_previous_answer():
    _, tr = run_strategy(lambda x: x / 2 + 1, adaptive_rule(5))
    for k in range(1, tr.count):
        assert tr.nodes[k] == tr.answers[k - 1]
    assert tr.count == len(tr.nodes) == len(tr.answers) == 5


def test_budget_cap():
    s = Strategy(lambda a, o: 0.0, lambda g, o: 10**7, lambda a, o: 0.0)
    with pytest.raises(BudgetExceeded):
        run_strategy(lambda x: x, s)
    s = Strategy(lambda a, o: 0.0, lambda g, o: -1, lambda a, o: 0.0)
    with pytest.raises(ValueError):
        run_strategy(lambda x: x, s)


def test_sequentiality():
    # answers after query k cannot change nodes 1..k
    s = adaptive_rule(6)
    _, base = run_strategy(lambda x: x + 1, s)
    for k in range(1, 6):
        calls = {"n": 0}

        def g(x, k=k):
            calls["n"] += 1
            return x + 1 if calls["n"] <= k else -x * 7

        _, tr = run_strategy(g, s)
        assert tr.nodes[: k + 1] == base.nodes[: k + 1]


def test_deterministic_is_pure():
    s = adaptive_rule(4)
    assert run_strategy(math.cos, s) == run_strategy(math.cos, s)


def test_randomized_depends_on_omega_only():
    s = random_node_rule(5, 0.0, 1.0)
    a = run_strategy(lambda x: x, s, omega=3)[1]
    b = run_strategy(lambda x: x, s, omega=3)[1]
    c = run_strategy(lambda x: x, s, omega=4)[1]
    assert a.nodes == b.nodes and a.nodes != c.nodes


# -- baseline trace ----------------------------------------------------------

def test_baseline_fixed_rule_ignores_b_star():
    nodes = equidistant_nodes(5, 0.0, 0.5)
    s = fixed_node_rule(nodes)
    assert baseline_trace(s, 0.0, 10).nodes == list(nodes)
    assert baseline_trace(s, 42.0, 10).nodes == list(nodes)
    assert baseline_trace(s, 1.0, 3).nodes == list(nodes[:3])


def test_baseline_rejects_zero_budget():
    with pytest.raises(ValueError):
        baseline_trace(fixed_node_rule([1.0]), 0.0, 0)


def test_baseline_adaptive_repeatable():
    s = adaptive_rule(4)
    t1, t2 = baseline_trace(s, 0.7, 4, omega=1), baseline_trace(s, 0.7, 4, omega=1)
    assert t1.nodes == t2.nodes == [0.25, 0.7, 0.7, 0.7]


# -- node catalog ------------------------------------------------------------

def test_node_catalog():
    assert np.allclose(equidistant_nodes(3, 0, 1), [0, 0.5, 1])
    assert np.allclose(equidistant_nodes(1, 0, 1), [0.5])
    assert np.allclose(midpoint_nodes(2, 0, 1), [0.25, 0.75])
    g = gauss_nodes(3, 0, 1)
    assert np.allclose(g, 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0, math.sqrt(0.6)]))
    assert catalog_nodes("empty", 4, 0, 1).size == 0
    with pytest.raises(ValueError):
        catalog_nodes("simpson", 3, 0, 1)


# -- average-case error ------------------------------------------------------

def test_point_mass_exact():
    s = fixed_node_rule([0.0], estimator=lambda a, o: 2.5)
    rep = average_case_error(s, [(lambda x: 0.0, 2.5, 1.0)])
    assert rep.avg_error == 0.0 and rep.worst_cost == 1


@pytest.mark.parametrize("c", [-0.5, -0.2, 0.0, 0.4, 0.5, 0.9, -3.0])
def test_two_point_median(c):
    eps = 1.0
    s = fixed_node_rule([], estimator=lambda a, o: c)
    support = [(lambda x: 0.0, eps / 2, 0.5), (lambda x: 0.0, -eps / 2, 0.5)]
    rep = average_case_error(s, support)
    assert rep.avg_error >= eps / 2
    if abs(c) <= eps / 2:
        assert rep.avg_error == eps / 2


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        average_case_error(fixed_node_rule([]), [(lambda x: 0, 0.0, 0.3)])


def _indicator_family(m, eps):
    """``g_{i,s}(x) = s`` on the ith of m equal cells of [0, 1); value ``s eps/2``."""
    support = []
    for i in range(m):
        for sgn in (1, -1):
            g = lambda x, i=i, sgn=sgn: sgn if i / m < x < (i + 1) / m else 0
            support.append((g, sgn * eps / 2, 1 / (2 * m)))
    return support


def _sign_estimator(eps):
    def est(answers, omega):
        hits = [a for a in answers if a != 0]
        return hits[0] * eps / 2 if hits else 0.0
    return est


def test_brute_force_matches_deterministic_rule():
    m, eps = 6, 1.0
    for k in range(0, m + 1):
        nodes = [(i + 0.5) / m for i in range(k)]  # one node per cell centre
        s = fixed_node_rule(nodes, _sign_estimator(eps))
        rep = average_case_error(s, _indicator_family(m, eps))
        assert rep.avg_error == pytest.approx(float(brute_force_min_avg_error([(0.5, -0.5)] * m, k)))


@pytest.mark.parametrize("n", [1, 2])
def test_randomized_surrogate_bound(n):
    m, eps = 12, 1.0
    s = random_node_rule(n, 0.0, 1.0)
    s = Strategy(s.next_node, s.stop_rule, _sign_estimator(eps), deterministic=False, name="random")
    rep = average_case_error(s, _indicator_family(m, eps), sampler=lambda j: 1000 + j, n_mc=400)
    assert rep.mean_cost <= n
    floor = 0.5 * float(brute_force_min_avg_error([(0.5, -0.5)] * m, 2 * n))
    assert rep.avg_error >= floor - 3 * rep.std_error
    # exact touch probability for n uniform nodes
    assert rep.avg_error == pytest.approx((1 - 1 / m) ** n * eps / 2, abs=4 * rep.std_error + 1e-12)


# -- brute force -------------------------------------------------------------

def test_brute_force_examples():
    fam = [(Fraction(1, 2), Fraction(-1, 2))] * 4
    assert brute_force_min_avg_error(fam, 0) == Fraction(1, 2)
    assert brute_force_min_avg_error(fam, 4) == 0
    assert brute_force_min_avg_error(fam, 1) == Fraction(3, 8)


def test_brute_force_limits():
    with pytest.raises(ValueError):
        brute_force_min_avg_error([(1, -1)] * 21, 1)
    with pytest.raises(ValueError):
        brute_force_min_avg_error([(1, -1)], -1)


def _enumerate_all(vals, n_hits):
    # every hit set, every constant c drawn from the pooled values
    m = len(vals)
    best = None
    for size in range(min(n_hits, m) + 1):
        for hit in itertools.combinations(range(m), size):
            pool = [x for i in range(m) if i not in hit for x in vals[i]]
            cands = pool or [Fraction(0)]
            cost = min(sum((abs(x - c) for x in pool), Fraction(0)) for c in cands)
            best = cost if best is None else min(best, cost)
    return best / (2 * m)


pair = st.tuples(st.fractions(-5, 5, max_denominator=20), st.fractions(-5, 5, max_denominator=20))


@settings(max_examples=80, deadline=None)
@given(st.lists(pair, min_size=1, max_size=6), st.integers(0, 6))
def test_brute_force_matches_exhaustive(fam, k):
    assert brute_force_min_avg_error(fam, k) == _enumerate_all(fam, k)


@settings(max_examples=40, deadline=None)
@given(st.lists(pair, min_size=1, max_size=7))
def test_brute_force_monotone(fam):
    vals = [brute_force_min_avg_error(fam, k) for k in range(len(fam) + 1)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 0
