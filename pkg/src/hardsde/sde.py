"""The four-dimensional hard SDE family, its exact expectation, and Monte Carlo estimators.

State ``x = (x1, x2, x3, x4)`` driven by one Brownian motion ``W`` on ``[0, 1]``:

    a(x) = (rho2(x4) * rho3(x3/(1+x3^2) * v(x2)), 0, h(x4), 1)
    b(x) = (0, rho1(x4), 0, 0)

Started at 0 the solution has ``x4(t) = t``, ``x3(1) = I_h`` and
``x2(1) ~ N(0, c_rho1)``, so that ``X1(1) = c_rho2 * rho3(I_h/(1+I_h^2) * v(Z))``.
Since ``b`` depends only on ``x4``, which moves deterministically, the
higher-order Ito-Taylor corrections vanish and Euler is the representative scheme.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .growth import GrowthFn
from .quadrature import QuadResult, integrate
from .smoothfn import RHO1, RHO2, RHO3, RhoTriple, SmoothScalarFn, ConstantFn
from .streams import PURPOSE_DIRECT, replication_stream, stream

BLOCK = 4096  # replications per work unit; fixed so results never depend on threads


@dataclass(frozen=True)
class SdeInstance:
    h: SmoothScalarFn
    v: SmoothScalarFn
    I_h: float
    I_h_err: float
    rho: RhoTriple
    u: GrowthFn | None = None
    force_zero_drift: bool = False  # test hook: a == 0

    @classmethod
    def build(cls, h: SmoothScalarFn, v: SmoothScalarFn, u: GrowthFn | None = None,
              tol: float = 1e-14, rho: RhoTriple | None = None, force_zero_drift: bool = False) -> "SdeInstance":
        r = integrate(h.value, 0.0, 0.5, tol=tol, breakpoints=h.breakpoints)
        return cls(h, v, r.value, r.error, rho or RhoTriple.build(), u, force_zero_drift)

    @property
    def k_h(self) -> float:
        """The factor ``I_h / (1 + I_h^2)`` multiplying ``v`` inside rho3."""
        return self.I_h / (1.0 + self.I_h**2)

    def negated(self) -> "SdeInstance":
        return SdeInstance(-self.h, self.v, -self.I_h, self.I_h_err, self.rho, self.u, self.force_zero_drift)

    def with_h(self, h: SmoothScalarFn, tol: float = 1e-14) -> "SdeInstance":
        return SdeInstance.build(h, self.v, self.u, tol, self.rho, self.force_zero_drift)

    def x1_terminal(self, z):
        """``X1(1)`` as a function of ``X2(1) = z``."""
        return self.rho.c_rho2 * RHO3.value(self.k_h * self.v.value(np.asarray(z, dtype=float)))


def drift_eval(inst: SdeInstance, x) -> np.ndarray:
    """``a(x)`` for one state (shape (4,)) or a stack of states (shape (..., 4))."""
    x = np.asarray(x, dtype=float)
    x2, x3, x4 = x[..., 1], x[..., 2], x[..., 3]
    out = np.zeros(x.shape)
    if inst.force_zero_drift:
        return out
    q = x3 / (1.0 + x3 * x3)
    out[..., 0] = RHO2.value(x4) * RHO3.value(q * inst.v.value(x2))
    out[..., 2] = inst.h.value(x4)
    out[..., 3] = 1.0
    return out


def diffusion_eval(inst: SdeInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    out[..., 1] = RHO1.value(x[..., 3])
    return out


# --------------------------------------------------------------------------
# exact expectation


@dataclass(frozen=True)
class QuadratureConfig:
    """Gaussian truncation at ``truncation_halfwidth`` standard deviations plus panel tolerances."""

    truncation_halfwidth: float = 12.0
    panel_tolerance: float = 1e-13
    rel_tolerance: float = 1e-11

    def __post_init__(self):
        if not self.truncation_halfwidth > 0:
            raise ValueError("truncation_halfwidth must be positive")
        if not (self.panel_tolerance > 0 and self.rel_tolerance >= 0):
            raise ValueError("tolerances must be positive")
        if math.exp(-0.5 * self.truncation_halfwidth**2) > self.panel_tolerance:
            raise ValueError("Gaussian tail exp(-L^2/2) exceeds the panel tolerance; increase L")


@dataclass(frozen=True)
class Expectation:
    value: float
    err_bound: float
    quad: QuadResult = field(repr=False)

    def __iter__(self):
        return iter((self.value, self.err_bound))


def exact_expectation(inst: SdeInstance, q: QuadratureConfig = QuadratureConfig()) -> Expectation:
    """``E[X1(1)] = c_rho2 * E[rho3(k_h v(sqrt(c_rho1) Z))]`` with ``Z`` standard normal.

    The bound adds the quadrature certificate, the truncated tail
    ``c_rho2 * sup|rho3| * erfc(L/sqrt 2)`` and the propagated error of ``c_rho2``.
    """
    c1, c2 = inst.rho.c_rho1, inst.rho.c_rho2
    s = math.sqrt(c1)
    L = q.truncation_halfwidth
    k = inst.k_h
    if k == 0.0 or inst.force_zero_drift:
        return Expectation(0.0, 0.0, QuadResult(0.0, 0.0, 0))
    norm = 1.0 / math.sqrt(2.0 * math.pi)

    def f(z):
        return RHO3.value(k * inst.v.value(s * z)) * np.exp(-0.5 * z * z) * norm

    bps = [p / s for p in inst.v.breakpoints if math.isfinite(p)]
    r = integrate(f, -L, L, tol=q.panel_tolerance, rel_tol=q.rel_tolerance, breakpoints=bps)
    tail = RHO3.sup_bound * float(erfc(L / math.sqrt(2.0)))
    value = c2 * r.value
    err = c2 * (r.error + tail) + inst.rho.c_rho2_err * (abs(r.value) + tail)
    return Expectation(value, err, r)


# --------------------------------------------------------------------------
# sampling


def direct_samples(inst: SdeInstance, z: np.ndarray) -> np.ndarray:
    """Exact draws of ``X1(1)`` from standard normals ``z``."""
    return inst.x1_terminal(math.sqrt(inst.rho.c_rho1) * np.asarray(z, dtype=float))


def direct_sample(inst: SdeInstance, rng: np.random.Generator) -> float:
    return float(direct_samples(inst, rng.standard_normal()))


@dataclass(frozen=True)
class McResult:
    estimate: float
    std_error: float
    n: int
    cost: int = 0
    coef_evals: int = 0
    f_evals: int = 0


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(np.sum(values)) / n
    if n < 2:
        return mean, math.inf
    return mean, float(np.std(values, ddof=1)) / math.sqrt(n)


def direct_mc(inst: SdeInstance, n_samples: int, seed: int, block: int = 1 << 16) -> McResult:
    """Direct simulation estimator; block ``j`` uses its own stream."""
    out = np.empty(n_samples)
    for j, lo in enumerate(range(0, n_samples, block)):
        hi = min(lo + block, n_samples)
        out[lo:hi] = direct_samples(inst, stream(seed, j, PURPOSE_DIRECT).standard_normal(hi - lo))
    mean, se = _mean_stderr(out)
    return McResult(mean, se, n_samples, cost=n_samples, coef_evals=0, f_evals=n_samples)


def euler_paths(inst: SdeInstance, normals: np.ndarray, trajectory: bool = False):
    """Euler scheme from 0 on ``[0, 1]`` with ``n_steps = normals.shape[-1]`` steps.

    ``normals`` holds standard normals, one row per path. Returns ``X1(1)`` per
    path, or the whole ``X1`` trajectory (``n_steps + 1`` columns) if ``trajectory``.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    n_paths, n_steps = normals.shape
    dt = 1.0 / n_steps
    sq = math.sqrt(dt)
    x1 = np.zeros(n_paths)
    x2 = np.zeros(n_paths)
    x3 = 0.0  # deterministic: x3 and x4 do not see the noise
    x4 = 0.0
    traj = np.zeros((n_paths, n_steps + 1)) if trajectory else None
    zero = inst.force_zero_drift
    for ell in range(n_steps):
        dw = normals[:, ell] * sq
        r1 = float(RHO1.value(x4))
        if zero:
            x2 = x2 + r1 * dw
        else:
            r2 = float(RHO2.value(x4))
            q = x3 / (1.0 + x3 * x3)
            a1 = r2 * RHO3.value(q * inst.v.value(x2)) if r2 != 0.0 else 0.0
            x1 = x1 + a1 * dt
            x3 = x3 + float(inst.h.value(x4)) * dt
            x2 = x2 + r1 * dw
            x4 = x4 + dt
        if trajectory:
            traj[:, ell + 1] = x1
    return traj if trajectory else x1


def euler_path(inst: SdeInstance, n_steps: int, rng: np.random.Generator) -> float:
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    return float(euler_paths(inst, rng.standard_normal((1, n_steps)))[0])


@dataclass(frozen=True)
class McConfig:
    """Replication ``i`` draws its increments from ``replication_stream(master_seed, i)``."""

    n_steps: int
    n_replications: int
    master_seed: int = 0
    stream_scheme: str = "philox(key=seed, counter=[0, i, 1, 0]); ziggurat normals"

    def __post_init__(self):
        if self.n_steps < 1 or self.n_replications < 1:
            raise ValueError("n_steps and n_replications must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


def euler_cost(n_steps: int, n_replications: int) -> tuple[int, int]:
    """(coefficient evaluations, f evaluations).

    Each path evaluates ``a`` and ``b`` at its ``n_steps - 1`` random states; the
    values at the common start point are shared. With ``n_replications = n_steps = n``
    the total is ``2n(n-1) + n``.
    """
    return 2 * n_replications * (n_steps - 1), n_replications


def _euler_block(inst: SdeInstance, cfg: McConfig, lo: int, hi: int) -> np.ndarray:
    normals = np.empty((hi - lo, cfg.n_steps))
    for r, i in enumerate(range(lo, hi)):
        normals[r] = replication_stream(cfg.master_seed, i).standard_normal(cfg.n_steps)
    return euler_paths(inst, normals)


def mc_euler_estimate(inst: SdeInstance, cfg: McConfig, threads: int = 1) -> McResult:
    """Monte Carlo Euler estimate of ``E[X1(1)]``; bit-identical for any ``threads``."""
    ranges = [(lo, min(lo + BLOCK, cfg.n_replications)) for lo in range(0, cfg.n_replications, BLOCK)]
    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda r: _euler_block(inst, cfg, *r), ranges))
    else:
        parts = [_euler_block(inst, cfg, *r) for r in ranges]
    values = np.concatenate(parts)
    mean, se = _mean_stderr(values)
    coef, fev = euler_cost(cfg.n_steps, cfg.n_replications)
    return McResult(mean, se, cfg.n_replications, coef + fev, coef, fev)


# --------------------------------------------------------------------------
# class membership


@dataclass
class MembershipReport:
    rows: dict[str, float]
    limits: dict[str, float]

    @property
    def failures(self) -> list[str]:
        return [k for k, val in self.rows.items() if not val <= self.limits[k]]

    @property
    def passed(self) -> bool:
        return not self.failures


def default_membership_grid(n: int = 13) -> np.ndarray:
    """Product grid: x1 in {0, 1}, x2, x3 in [-3, 3], x4 in [-1/2, 3/2]."""
    x1 = np.array([0.0, 1.0])
    x2 = np.linspace(-3.0, 3.0, n)
    x3 = np.linspace(-3.0, 3.0, n)
    x4 = np.linspace(-0.5, 1.5, 4 * n + 1)
    g = np.meshgrid(x1, x2, x3, x4, indexing="ij")
    return np.stack([c.ravel() for c in g], axis=-1)


def drift_partials(inst: SdeInstance, x) -> np.ndarray:
    """Jacobian ``D a`` on a stack of states: shape (..., 4 components, 4 variables)."""
    x = np.asarray(x, dtype=float)
    x2, x3, x4 = x[..., 1], x[..., 2], x[..., 3]
    J = np.zeros(x.shape + (4,))
    if inst.force_zero_drift:
        return J
    q = x3 / (1.0 + x3 * x3)
    vv, dv = inst.v.value(x2), inst.v.derivative(x2)
    r2, dr2 = RHO2.value(x4), RHO2.derivative(x4)
    d3 = RHO3.derivative(q * vv)
    J[..., 0, 1] = r2 * d3 * q * dv
    J[..., 0, 2] = r2 * d3 * vv * (1.0 - x3 * x3) / (1.0 + x3 * x3) ** 2
    J[..., 0, 3] = dr2 * RHO3.value(q * vv)
    J[..., 2, 3] = inst.h.derivative(x4)
    return J


def diffusion_partials(inst: SdeInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    J = np.zeros(x.shape + (4,))
    J[..., 1, 3] = RHO1.derivative(x[..., 3])
    return J


def verify_class_membership(inst: SdeInstance, grid=None, v_grid=None, h_grid=None) -> MembershipReport:
    """Grid check that ``(a, b)`` has the required bounds for growth ``inst.u``.

    Rows ending in ``/(1+u)`` are ratios that must stay at most 1. The ``v`` rows
    check membership of ``v`` itself (``|v|, |v'| <= 1 + u``); the ``h`` rows check
    ``|h|, |h'| <= 1`` and that ``h`` vanishes off ``[0, 1/2]``.
    """
    if inst.u is None:
        raise ValueError("instance carries no growth function")
    u = inst.u
    x = default_membership_grid() if grid is None else np.asarray(grid, dtype=float)
    xv = np.linspace(-6.0, 6.0, 4001) if v_grid is None else np.asarray(v_grid, dtype=float)
    xh = np.linspace(-0.5, 1.0, 3001) if h_grid is None else np.asarray(h_grid, dtype=float)

    weight = 1.0 + u(np.linalg.norm(x, axis=-1))
    a = drift_eval(inst, x)
    Da = drift_partials(inst, x)
    Db = diffusion_partials(inst, x)
    rows: dict[str, float] = {"sup|a|": float(np.max(np.abs(a))), "sup|b|": float(np.max(np.abs(diffusion_eval(inst, x))))}
    for j in range(4):
        rows[f"|d a/d x{j + 1}|/(1+u)"] = float(np.max(np.max(np.abs(Da[..., :, j]), axis=-1) / weight))
    for j in range(4):
        rows[f"|d b/d x{j + 1}|"] = float(np.max(np.abs(Db[..., :, j])))
    wv = 1.0 + u(np.abs(xv))
    rows["|v|/(1+u)"] = float(np.max(np.abs(inst.v.value(xv)) / wv))
    rows["|v'|/(1+u)"] = float(np.max(np.abs(inst.v.derivative(xv)) / wv))
    rows["sup|h|"] = float(np.max(np.abs(inst.h.value(xh))))
    rows["sup|h'|"] = float(np.max(np.abs(inst.h.derivative(xh))))
    off = (xh < 0.0) | (xh > 0.5)
    rows["sup|h| off [0,1/2]"] = float(np.max(np.abs(inst.h.value(xh[off])), initial=0.0))
    limits = {k: 1.0 for k in rows}
    limits["sup|h| off [0,1/2]"] = 0.0
    return MembershipReport(rows, limits)


def easy_v() -> SmoothScalarFn:
    """``0.5 + 0.5 tanh(x)``: bounded with bounded derivative."""
    from .smoothfn import CallableFn

    return CallableFn(lambda x: 0.5 + 0.5 * np.tanh(x), lambda x: 0.5 / np.cosh(x) ** 2, "0.5+0.5tanh")


__all__ = [
    "SdeInstance", "QuadratureConfig", "McConfig", "McResult", "Expectation", "MembershipReport",
    "drift_eval", "diffusion_eval", "drift_partials", "diffusion_partials", "exact_expectation",
    "direct_sample", "direct_samples", "direct_mc", "euler_path", "euler_paths", "euler_cost",
    "mc_euler_estimate", "verify_class_membership", "default_membership_grid", "easy_v", "ConstantFn",
]
