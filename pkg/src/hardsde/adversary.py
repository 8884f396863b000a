"""Fooling families against concrete rules, and the closed-form lower-bound formulas.

Every formula with an exponentially small value has a ``log_`` twin that never
underflows.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .growth import GrowthAdmissibility, GrowthFn, VnSpec
from .infoalg import BudgetExceeded, Strategy, run_strategy
from .quadrature import integrate
from .sde import QuadratureConfig, SdeInstance, diffusion_eval, diffusion_partials, drift_eval, drift_partials, exact_expectation
from .smoothfn import (
    RHO3,
    BumpFamily1d,
    BumpFamilySde,
    BumpSum,
    RhoTriple,
    SmoothScalarFn,
    build_bump_family_1d,
    build_bump_family_sde,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


# --------------------------------------------------------------------------
# bound formulas


def prop1_bound(m: int, n: int, eps: float) -> float:
    """``(m - 16n) eps / (8m)``; non-positive values are vacuous."""
    if m < 1 or n < 1 or not eps > 0:
        raise ValueError("need m >= 1, n >= 1 and eps > 0")
    return (m - 16 * n) * eps / (8 * m)


def prop2_bounds(m: int, n: int, eps: float) -> tuple[float, float | None]:
    """Deterministic bound ``(m-n) eps / 2`` and, when ``n <= m/4``, randomized ``sqrt((m-4n)/128) eps``."""
    if m < 1 or n < 0:
        raise ValueError("need m >= 1 and n >= 0")
    det = (m - n) / 2 * eps
    ran = math.sqrt((m - 4 * n) / 128) * eps if 4 * n <= m else None
    return det, ran


def khintchine_verify(a: Sequence[float], rel_slack: float = 1e-12) -> bool:
    """Check ``sum over all sign vectors of |sum_i s_i a_i| >= 2^(k-1/2) ||a||_2`` exhaustively."""
    a = np.asarray(a, dtype=float)
    k = a.size
    if not 1 <= k <= 20:
        raise ValueError("vector length must be between 1 and 20")
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
    lhs = float(np.sum(np.abs(signs @ a)))
    # compare squares: lhs^2 >= 2^(2k-1) * sum a_i^2
    rhs_sq = 2.0 ** (2 * k - 1) * float(np.dot(a, a))
    return lhs * lhs >= rhs_sq * (1.0 - rel_slack)


SDE_PREFACTOR = 1.0 / (17 * 2**7 * math.e * math.sqrt(math.pi))
STATED_CONSTANT = 56
PROOF_CONSTANT = 51


def log_theorem_bound_sde(u: GrowthFn, delta: float, x_delta: float, n: int,
                          constant: int = STATED_CONSTANT) -> float:
    """Natural log of ``prefactor * exp(-2^13 (u^-1(17^2 C^4 kappa^2 n^4))^2)``.

    ``constant = 56`` is the stated value, ``51`` the one obtained by tracking the
    estimate of beta_n. The smaller argument gives the larger (still valid) bound.
    """
    if n < 1:
        raise ValueError("n must be positive")
    adm = GrowthAdmissibility.check(u, delta, x_delta)
    y = 17.0**2 * float(constant) ** 4 * adm.kappa_delta**2 * float(n) ** 4
    x = u.inverse(y)
    return math.log(SDE_PREFACTOR) - 2.0**13 * x * x


def theorem_bound_sde(u: GrowthFn, delta: float, x_delta: float, n: int,
                      constant: int = STATED_CONSTANT) -> float:
    """Linear-space value; underflows to 0.0 for realistic inputs (use the log form)."""
    return math.exp(log_theorem_bound_sde(u, delta, x_delta, n, constant))


ONE_D_CONSTANT = math.sqrt(2.0) * math.sin(1.0 / 12.0) * math.exp(-4.0) / (6.0 * math.sqrt(math.pi))


def log_theorem_bound_1d(u: GrowthFn, n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    x = u.inverse(max(float(n), u(0.0)))
    return math.log(ONE_D_CONSTANT) - x * x


def theorem_bound_1d(u: GrowthFn, n: int) -> float:
    return math.exp(log_theorem_bound_1d(u, n))


# --------------------------------------------------------------------------
# oracles


class SdeAnswer(NamedTuple):
    """Order-one information at a state: coefficients, Jacobians, and ``f = x1``."""

    a: np.ndarray
    b: np.ndarray
    Da: np.ndarray
    Db: np.ndarray
    f: float
    df: np.ndarray
    bump_active: bool  # some derivative of h is nonzero at x4


class SdeOracle:
    def __init__(self, inst: SdeInstance):
        self.inst = inst

    def __call__(self, x) -> SdeAnswer:
        x = np.asarray(x, dtype=float).reshape(4)
        return SdeAnswer(
            drift_eval(self.inst, x),
            diffusion_eval(self.inst, x),
            drift_partials(self.inst, x),
            diffusion_partials(self.inst, x),
            float(x[0]),
            np.array([1.0, 0.0, 0.0, 0.0]),
            bool(self.inst.h(float(x[3])) != 0.0),
        )


class Answer1d(NamedTuple):
    value: float
    deriv: float
    bump_active: bool


class FunctionOracle:
    """Answers ``(f(x), f'(x), bump flag)`` for a smooth scalar function."""

    def __init__(self, f: SmoothScalarFn, outer=None):
        self.f = f
        self.outer = outer  # optional composition: sin for the 1-d family

    def __call__(self, x) -> Answer1d:
        x = float(x)
        hv, hd = self.f(x), self.f.deriv(x)
        if self.outer is None:
            return Answer1d(hv, hd, hv != 0.0)
        return Answer1d(float(np.sin(hv)), float(np.cos(hv) * hd), hv != 0.0)


def open_touch(points: Sequence[float], supports: Sequence[tuple[float, float]]) -> list[int]:
    """1-based indices of supports whose open interval contains at least one point."""
    p = np.asarray(points, dtype=float).ravel()
    return [i + 1 for i, (lo, hi) in enumerate(supports) if np.any((p > lo) & (p < hi))]


# --------------------------------------------------------------------------
# SDE fooling


@dataclass
class FoolingReportSde:
    n: int
    m: int
    family: BumpFamilySde = field(repr=False)
    v: SmoothScalarFn = field(repr=False)
    epsilon: float
    epsilons: tuple[float, ...] = field(repr=False, default=())
    eps_formula: float = math.nan
    bound_value: float = math.nan
    det_bound: float = math.nan
    ran_bound: float | None = None
    measured_gap: float = math.nan
    untouched_set: tuple[int, ...] = ()
    touched_set: tuple[int, ...] = ()
    cost: int = 0
    fooled: bool | None = None

    @property
    def vacuous(self) -> bool:
        return not self.epsilon > 0 or not self.bound_value > 0


def _sde_eps(family: BumpFamilySde, v: SmoothScalarFn, u, q: QuadratureConfig, rho: RhoTriple):
    eps = []
    for h in family.members:
        inst = SdeInstance.build(h, v, u, rho=rho)
        eps.append(exact_expectation(inst, q).value - exact_expectation(inst.negated(), q).value)
    return eps


def eps_formula_sde(n: int, v: SmoothScalarFn, rho: RhoTriple, q: QuadratureConfig = QuadratureConfig()) -> float:
    """``(2 c2 / sqrt(2 pi c1)) int rho3(4(102n)^2/(1+16(102n)^4) v(x)) exp(-x^2/(2 c1)) dx``."""
    c1, c2 = rho.c_rho1, rho.c_rho2
    k = 4.0 * (102.0 * n) ** 2 / (1.0 + 16.0 * (102.0 * n) ** 4)
    s = math.sqrt(c1)
    L = q.truncation_halfwidth * s
    f = lambda x: RHO3.value(k * v.value(x)) * np.exp(-x * x / (2.0 * c1))
    bps = [p for p in v.breakpoints if math.isfinite(p)]
    r = integrate(f, -L, L, tol=q.panel_tolerance * s, rel_tol=q.rel_tolerance, breakpoints=bps)
    return 2.0 * c2 / math.sqrt(2.0 * math.pi * c1) * r.value


def build_fooling_sde(n: int, v: SmoothScalarFn, u: GrowthFn | None = None,
                      q: QuadratureConfig = QuadratureConfig(), rho: RhoTriple | None = None,
                      rel_spread: float = 1e-10) -> FoolingReportSde:
    """The ``m = 17n`` pairs ``+-h_i``, their common gap ``eps``, and the randomized bound."""
    if n < 1:
        raise ValueError("n must be positive")
    rho = rho or RhoTriple.build()
    m = 17 * n
    fam = build_bump_family_sde(m)
    eps = _sde_eps(fam, v, u, q, rho)
    e1 = eps[0]
    spread = max(abs(e - e1) for e in eps)
    if spread > rel_spread * max(abs(e1), 1e-300) and spread > 1e-10:
        raise AssertionError(f"gaps differ across members by {spread:.3g}")
    bound = prop1_bound(m, n, e1) if e1 > 0 else 0.0
    det, ran = prop2_bounds(m, n, e1)
    return FoolingReportSde(n, m, fam, v, e1, tuple(eps), eps_formula_sde(n, v, rho, q), bound, det, ran)


def fool_deterministic_sde_rule(rule: Strategy, n_budget: int, v: SmoothScalarFn, u: GrowthFn | None = None,
                                m: int | None = None, q: QuadratureConfig = QuadratureConfig(),
                                rho: RhoTriple | None = None) -> FoolingReportSde:
    """Flip the signs of every bump the rule never sees and measure the change in the solution.

    The rule runs on ``g`` with ``h = sum_i h_i``. A member is touched when some
    queried state has ``x4`` in its open support. The instance ``h`` negates the
    untouched members; both instances give identical answers at every queried
    node, so the rule returns the same estimate for both.
    """
    if not rule.deterministic:
        raise ValueError("rule must be deterministic")
    rho = rho or RhoTriple.build()
    m = 17 * n_budget if m is None else m
    fam = build_bump_family_sde(m)
    g_inst = SdeInstance.build(fam.signed_sum([1] * m), v, u, rho=rho)
    est_g, trace = run_strategy(SdeOracle(g_inst), rule)
    if trace.count > n_budget:
        raise BudgetExceeded(f"rule used {trace.count} queries, budget {n_budget}")
    x4 = [float(np.asarray(x, dtype=float).reshape(4)[3]) for x in trace.nodes]
    touched = open_touch(x4, [fam.support(i) for i in range(1, m + 1)])
    J = tuple(i for i in range(1, m + 1) if i not in touched)
    signs = [-1 if i in J else 1 for i in range(1, m + 1)]
    h_inst = SdeInstance.build(fam.signed_sum(signs), v, u, rho=rho)
    est_h, trace_h = run_strategy(SdeOracle(h_inst), rule)
    fooled = est_g == est_h and all(
        all(np.array_equal(np.asarray(p), np.asarray(r)) for p, r in zip(a1, a2))
        for a1, a2 in zip(trace.answers, trace_h.answers)
    )
    gap = abs(exact_expectation(g_inst, q).value - exact_expectation(h_inst, q).value)
    e1 = _sde_eps(BumpFamilySde(m, fam.c0, fam.c0_err, fam.members[:1]), v, u, q, rho)[0]
    det, ran = prop2_bounds(m, trace.count, e1)
    bound = prop1_bound(m, max(n_budget, 1), e1) if e1 > 0 else 0.0
    return FoolingReportSde(
        n_budget, m, fam, v, e1, (e1,), math.nan, bound, det, ran, gap, J, tuple(touched), trace.count, fooled
    )


def log_eps_lower_bound_sde(spec: VnSpec, rho: RhoTriple) -> float:
    """Log of ``(2 c2/sqrt(2 pi c1)) (rho3(1)/4) exp(-alpha_n^2/(2 c1))``."""
    c1, c2 = rho.c_rho1, rho.c_rho2
    return (math.log(2.0 * c2 / math.sqrt(2.0 * math.pi * c1)) + math.log(RHO3(1.0) / 4.0)
            - spec.alpha_n**2 / (2.0 * c1))


# --------------------------------------------------------------------------
# one-dimensional fooling


def s_int(f_tilde: SmoothScalarFn, lo: float = -12.0, hi: float = 12.0, tol: float = 1e-14) -> float:
    """``(1/sqrt(2 pi)) int_lo^hi sin(f_tilde(x)) exp(-x^2/2) dx``.

    The default window loses at most ``erfc(12/sqrt 2) < 4e-33`` of Gaussian mass.
    Callers whose ``sin(f_tilde)`` vanishes off a known interval pass that interval.
    """
    g = lambda x: np.sin(f_tilde.value(x)) * np.exp(-0.5 * x * x) / SQRT_2PI
    bps = [p for p in f_tilde.breakpoints if lo < p < hi]
    return integrate(g, lo, hi, tol=tol, rel_tol=1e-12, breakpoints=bps).value


@dataclass
class FoolingReport1d:
    n: int
    family: BumpFamily1d = field(repr=False)
    rule_nodes: tuple[float, ...]
    signs: tuple[int, ...]
    epsilon: float
    eps_lemma: float
    epsilons: tuple[float, ...] = field(repr=False)
    integrand_gap: float
    bound_value: float
    untouched_set: tuple[int, ...]
    touched_set: tuple[int, ...]


def eps_lemma_1d(u: GrowthFn, n: int) -> float:
    """``sqrt(2/pi) (sin(1/12) e^-4 / 3) exp(-(u^-1(z_n))^2) / n``."""
    x = u.inverse(max(float(n), u(0.0)))
    return math.sqrt(2.0 / math.pi) * math.sin(1.0 / 12.0) * math.exp(-4.0) / 3.0 * math.exp(-x * x) / n


def fool_deterministic_quadrature(nodes: Sequence[float], n: int, u: GrowthFn) -> FoolingReport1d:
    """Fool a fixed node set with the ``2n`` signed bump pairs composed with ``sin``."""
    nodes = tuple(float(x) for x in np.asarray(nodes, dtype=float).ravel())
    if len(nodes) > n:
        raise BudgetExceeded(f"{len(nodes)} nodes exceed the budget n = {n}")
    fam = build_bump_family_1d(n, u)
    size = fam.size
    lo, hi = fam.support(1)[0], fam.support(size)[1]
    # S^int is additive over disjoint supports since sin(0) = 0
    eps_i = [s_int(fam.member(i, 1), *fam.support(i)) - s_int(fam.member(i, -1), *fam.support(i))
             for i in range(1, size + 1)]
    touched = open_touch(nodes, [fam.support(i) for i in range(1, size + 1)])
    J = tuple(i for i in range(1, size + 1) if i not in touched)
    signs = tuple(-1 if i in J else 1 for i in range(1, size + 1))
    s_g = s_int(fam.signed_sum([1] * size), lo, hi)
    s_h = s_int(fam.signed_sum(signs), lo, hi)
    eps = min(eps_i)
    det, _ = prop2_bounds(size, len(nodes), eps)
    return FoolingReport1d(n, fam, nodes, signs, eps, eps_lemma_1d(u, n), tuple(eps_i), abs(s_g - s_h), det,
                           J, tuple(touched))


def build_fooling_1d(n: int, u: GrowthFn) -> FoolingReport1d:
    """The family against the empty rule: every interval is untouched."""
    return fool_deterministic_quadrature((), n, u)
