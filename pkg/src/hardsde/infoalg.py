"""Sequential information-based algorithms, their query traces, and finite error functionals.

A strategy is the triple (next_node, stop_rule, estimator). Node ``k`` is chosen
from the first ``k-1`` answers and a randomness handle ``omega``; ``omega`` is
any object (a seed, a Generator, None) and is passed through unchanged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

DEFAULT_QUERY_CAP = 10**6


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Strategy:
    """``next_node(answers, omega)``, ``stop_rule(g, omega) -> int``, ``estimator(answers, omega)``.

    For the built-in deterministic rules ``stop_rule`` ignores ``g``. Strategies
    flagged ``deterministic`` must not look at ``omega``.
    """

    next_node: Callable[[tuple, Any], Any]
    stop_rule: Callable[[Any, Any], int]
    estimator: Callable[[tuple, Any], float]
    deterministic: bool = True
    name: str = "strategy"


@dataclass
class Trace:
    nodes: list = field(default_factory=list)
    answers: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.nodes)

    def record(self, node, answer) -> None:
        self.nodes.append(node)
        self.answers.append(answer)


def run_strategy(g: Callable[[Any], Any], s: Strategy, omega: Any = None,
                 cap: int = DEFAULT_QUERY_CAP) -> tuple[float, Trace]:
    """Run the query loop of ``s`` on the oracle ``g`` and return (estimate, trace)."""
    budget = int(s.stop_rule(g, omega))
    if budget < 0:
        raise ValueError(f"stop rule returned a negative budget {budget}")
    if budget > cap:
        raise BudgetExceeded(f"stop rule asks for {budget} queries, cap is {cap}")
    trace = Trace()
    for _ in range(budget):
        node = s.next_node(tuple(trace.answers), omega)
        trace.record(node, g(node))
    return float(s.estimator(tuple(trace.answers), omega)), trace


def baseline_trace(s: Strategy, b_star: Any, budget: int, omega: Any = None) -> Trace:
    """Trace of ``s`` on the constant oracle ``x -> b_star``, truncated at ``budget`` queries."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    const = lambda _x: b_star
    limit = min(int(s.stop_rule(const, omega)), budget)
    trace = Trace()
    for _ in range(limit):
        node = s.next_node(tuple(trace.answers), omega)
        trace.record(node, b_star)
    return trace


# --------------------------------------------------------------------------
# built-in rules


def fixed_node_rule(nodes: Sequence, estimator: Callable[[tuple, Any], float] | None = None,
                    name: str = "fixed") -> Strategy:
    """Non-adaptive deterministic rule querying ``nodes`` in order."""
    pts = tuple(nodes)
    est = estimator if estimator is not None else (lambda answers, omega: 0.0)
    return Strategy(
        next_node=lambda answers, omega: pts[len(answers)],
        stop_rule=lambda g, omega: len(pts),
        estimator=est,
        deterministic=True,
        name=name,
    )


def equidistant_nodes(n: int, lo: float, hi: float) -> np.ndarray:
    """``n`` equally spaced points including both ends (the midpoint if ``n = 1``)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n)


def midpoint_nodes(n: int, lo: float, hi: float) -> np.ndarray:
    return lo + (hi - lo) * (np.arange(n) + 0.5) / max(n, 1)


def gauss_nodes(n: int, lo: float, hi: float) -> np.ndarray:
    if n == 0:
        return np.zeros(0)
    x, _ = np.polynomial.legendre.leggauss(n)
    return lo + (hi - lo) * (x + 1.0) / 2.0


RULE_CATALOG = {"equidistant": equidistant_nodes, "midpoint": midpoint_nodes, "gauss": gauss_nodes,
                "empty": lambda n, lo, hi: np.zeros(0)}


def catalog_nodes(kind: str, n: int, lo: float, hi: float) -> np.ndarray:
    try:
        return np.asarray(RULE_CATALOG[kind](n, lo, hi), dtype=float)
    except KeyError:
        raise ValueError(f"unknown rule {kind!r}; choose from {sorted(RULE_CATALOG)}") from None


def random_node_rule(n: int, lo: float, hi: float, name: str = "uniform-random") -> Strategy:
    """Randomized rule: ``n`` uniform nodes from ``np.random.default_rng(omega)``; estimate 0."""

    def next_node(answers, omega):
        rng = np.random.default_rng(omega)
        return float(rng.uniform(lo, hi, size=n)[len(answers)])

    return Strategy(next_node, lambda g, omega: n, lambda answers, omega: 0.0, deterministic=False, name=name)


# --------------------------------------------------------------------------
# error functionals


@dataclass(frozen=True)
class CostErrorReport:
    """Average (or worst) error and cost over a finite weighted set of inputs."""

    avg_error: float
    std_error: float
    worst_error: float
    mean_cost: float
    worst_cost: int
    table: tuple = ()


def average_case_error(s: Strategy, support: Sequence[tuple[Any, float, float]],
                       sampler: Callable[[int], Any] | None = None, n_mc: int = 1) -> CostErrorReport:
    """``sum_g w_g |S(g) - S_hat(g)|`` over ``support = [(oracle, S(g), w_g), ...]``.

    Deterministic strategies are evaluated once with ``omega = None``. For
    randomized ones the error is averaged over ``omega = sampler(j)``,
    ``j < n_mc``, and the standard error of that average is reported.
    """
    weights = np.array([w for _, _, w in support], dtype=float)
    if not math.isclose(float(weights.sum()), 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("weights must sum to 1")
    omegas = [None] if s.deterministic else [sampler(j) for j in range(n_mc)]
    per_draw = np.empty(len(omegas))
    errors = np.zeros(len(support))
    costs = np.zeros(len(support))
    worst_cost = 0
    for j, om in enumerate(omegas):
        total = 0.0
        for k, (g, target, w) in enumerate(support):
            est, tr = run_strategy(g, s, om)
            e = abs(target - est)
            total += w * e
            errors[k] += e / len(omegas)
            costs[k] += tr.count / len(omegas)
            worst_cost = max(worst_cost, tr.count)
        per_draw[j] = total
    se = float(np.std(per_draw, ddof=1) / math.sqrt(len(omegas))) if len(omegas) > 1 else 0.0
    return CostErrorReport(
        avg_error=float(per_draw.mean()),
        std_error=se,
        worst_error=float(errors.max()),
        mean_cost=float(weights @ costs),
        worst_cost=worst_cost,
        table=tuple(zip(errors.tolist(), costs.tolist())),
    )


def _to_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def brute_force_min_avg_error(family: Sequence[tuple[Any, Any]], n_hits: int) -> Fraction:
    """Least average error under the uniform prior on the ``2m`` inputs ``g_{i,+-}``.

    ``family[i] = (S(g_{i,+}), S(g_{i,-}))``. An algorithm whose nodes touch the
    supports in ``H`` (``|H| <= n_hits``) may identify those inputs exactly. All
    other inputs yield the answers of the baseline trace, so it must return one
    common value ``c`` for them. The minimum is taken over ``H`` and ``c``; the
    best ``c`` is a median of the untouched values. Arithmetic is exact.
    """
    m = len(family)
    if m > 20:
        raise ValueError("enumeration is limited to m <= 20 pairs")
    if n_hits < 0:
        raise ValueError("n_hits must be non-negative")
    vals = [(_to_fraction(p), _to_fraction(q)) for p, q in family]
    best = None
    for size in range(min(n_hits, m) + 1):
        for hit in itertools.combinations(range(m), size):
            hs = set(hit)
            pool = sorted(x for i in range(m) if i not in hs for x in vals[i])
            if not pool:
                cost = Fraction(0)
            else:
                c = pool[(len(pool) - 1) // 2]
                cost = sum((abs(x - c) for x in pool), Fraction(0))
            if best is None or cost < best:
                best = cost
    return best / (2 * m)
