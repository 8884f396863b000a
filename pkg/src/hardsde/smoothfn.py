"""C-infinity building blocks: mollifiers, the three rho functions and bump families.

All functions are vectorised over numpy arrays and return Python floats for
scalar input. Only first derivatives are implemented analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .quadrature import QuadResult, integrate

# Exponent magnitude at which the mollifiers are replaced by their branch values.
EXP_CUTOFF = 700.0


def _out(x, arr: np.ndarray):
    return float(arr) if np.ndim(x) == 0 else arr


class SmoothScalarFn:
    """A real C-infinity function with analytic value and first derivative.

    ``sup_bound`` and ``deriv_bound`` are certified bounds on ``|f|`` and ``|f'|``
    (``inf`` when none is known). ``breakpoints`` lists points where the function
    changes analytic form; quadrature routines split there.
    """

    sup_bound: float = math.inf
    deriv_bound: float = math.inf
    breakpoints: tuple[float, ...] = ()

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return _out(x, self.value(np.asarray(x, dtype=float)))

    def deriv(self, x):
        return _out(x, self.derivative(np.asarray(x, dtype=float)))

    def __neg__(self) -> "ScaledFn":
        return ScaledFn(self, -1.0)


@dataclass(frozen=True)
class ScaledFn(SmoothScalarFn):
    base: SmoothScalarFn
    factor: float

    def value(self, x):
        return self.factor * self.base.value(x)

    def derivative(self, x):
        return self.factor * self.base.derivative(x)

    @property
    def sup_bound(self):
        return abs(self.factor) * self.base.sup_bound

    @property
    def deriv_bound(self):
        return abs(self.factor) * self.base.deriv_bound

    @property
    def breakpoints(self):
        return self.base.breakpoints


@dataclass(frozen=True)
class ConstantFn(SmoothScalarFn):
    c: float

    def value(self, x):
        return np.full(np.shape(x), self.c, dtype=float)

    def derivative(self, x):
        return np.zeros(np.shape(x), dtype=float)

    @property
    def sup_bound(self):
        return abs(self.c)

    @property
    def deriv_bound(self):
        return 0.0


@dataclass(frozen=True)
class CallableFn(SmoothScalarFn):
    """Adapter for user supplied (vectorised) value and derivative callables."""

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    label: str = "callable"

    def value(self, x):
        return np.asarray(self.f(x), dtype=float) * np.ones(np.shape(x))

    def derivative(self, x):
        return np.asarray(self.df(x), dtype=float) * np.ones(np.shape(x))


# --------------------------------------------------------------------------
# mollifiers


@dataclass(frozen=True)
class MollifierEta(SmoothScalarFn):
    """``v * (1 - exp(1/(x - tau)))`` left of ``tau``, constant ``v`` from ``tau`` on."""

    tau: float
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"plateau value must be positive, got {self.v}")

    @property
    def sup_bound(self):
        return self.v

    @property
    def deriv_bound(self):
        return 4.0 * math.exp(-2.0) * self.v

    @property
    def breakpoints(self):
        return (self.tau,)

    def _exponent(self, x):
        e = np.full(x.shape, -np.inf)
        left = x < self.tau
        e[left] = 1.0 / (x[left] - self.tau)
        return e

    def value(self, x):
        shape = np.shape(x)
        e = self._exponent(np.atleast_1d(np.asarray(x, dtype=float)))
        live = e > -EXP_CUTOFF
        out = np.full(e.shape, self.v, dtype=float)
        out[live] = -self.v * np.expm1(e[live])
        return out.reshape(shape)

    def derivative(self, x):
        shape = np.shape(x)
        e = self._exponent(np.atleast_1d(np.asarray(x, dtype=float)))
        live = e > -EXP_CUTOFF
        out = np.zeros(e.shape)
        out[live] = self.v * e[live] ** 2 * np.exp(e[live])
        return out.reshape(shape)


@dataclass(frozen=True)
class MollifierTheta(SmoothScalarFn):
    """Smooth monotone transition from ``v1`` (left of ``tau1``) to ``v2`` (right of ``tau2``)."""

    tau1: float
    tau2: float
    v1: float
    v2: float

    def __post_init__(self):
        if not self.tau1 < self.tau2:
            raise ValueError(f"need tau1 < tau2, got {self.tau1}, {self.tau2}")
        if not self.v1 < self.v2:
            raise ValueError(f"need v1 < v2, got {self.v1}, {self.v2}")

    @property
    def sup_bound(self):
        return max(abs(self.v1), abs(self.v2))

    @property
    def deriv_bound(self):
        return 4.0 * (self.v2 - self.v1) / (self.tau2 - self.tau1)

    @property
    def breakpoints(self):
        return (self.tau1, self.tau2)

    def _split(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = self.tau2 - self.tau1
        inner = (x > self.tau1) & (x < self.tau2)
        s = np.zeros(x.shape)
        xi = x[inner]
        s[inner] = d / (xi - self.tau1) - d / (self.tau2 - xi)
        # saturated interior points take the adjacent branch
        right = (x >= self.tau2) | (inner & (s <= -EXP_CUTOFF))
        live = inner & (np.abs(s) < EXP_CUTOFF)
        return x, s, live, right

    def value(self, x):
        shape = np.shape(x)
        x, s, live, right = self._split(x)
        out = np.where(right, float(self.v2), float(self.v1))
        out[live] = self.v1 + (self.v2 - self.v1) * expit(-s[live])
        return out.reshape(shape)

    def derivative(self, x):
        shape = np.shape(x)
        x, s, live, _ = self._split(x)
        out = np.zeros(x.shape)
        d = self.tau2 - self.tau1
        y = (x[live] - self.tau1) / d
        sl = s[live]
        out[live] = ((self.v2 - self.v1) / d) * (1.0 / y**2 + 1.0 / (1.0 - y) ** 2) * expit(sl) * expit(-sl)
        return out.reshape(shape)


def eta_eval(p: MollifierEta, x):
    return p(x)


def eta_deriv(p: MollifierEta, x):
    return p.deriv(x)


def theta_eval(p: MollifierTheta, x):
    return p(x)


def theta_deriv(p: MollifierTheta, x):
    return p.deriv(x)


# --------------------------------------------------------------------------
# the three rho functions

_THETA_RHO1 = MollifierTheta(0.0, 0.5, 0.0, 0.125)
_THETA_RHO2 = MollifierTheta(0.5, 1.0, 0.0, 0.125)


@dataclass(frozen=True)
class Rho(SmoothScalarFn):
    """``which=1``: 1/8 - theta_{0,1/2,0,1/8};  ``2``: theta_{1/2,1,0,1/8};  ``3``: x exp(-x^2)."""

    which: int

    def __post_init__(self):
        if self.which not in (1, 2, 3):
            raise ValueError(f"rho index must be 1, 2 or 3, got {self.which}")

    @property
    def sup_bound(self):
        return (0.125, 0.125, 1.0 / math.sqrt(2.0 * math.e))[self.which - 1]

    @property
    def deriv_bound(self):
        return 1.0

    @property
    def breakpoints(self):
        return ((0.0, 0.5), (0.5, 1.0), ())[self.which - 1]

    def value(self, x):
        if self.which == 1:
            return 0.125 - _THETA_RHO1.value(x)
        if self.which == 2:
            return _THETA_RHO2.value(x)
        # x * x keeps the evaluation exactly odd
        return x * np.exp(-(x * x))

    def derivative(self, x):
        if self.which == 1:
            return -_THETA_RHO1.derivative(x)
        if self.which == 2:
            return _THETA_RHO2.derivative(x)
        xx = x * x
        return (1.0 - 2.0 * xx) * np.exp(-xx)


RHO1, RHO2, RHO3 = Rho(1), Rho(2), Rho(3)


def rho_eval(which: int, x):
    return Rho(which)(x)


def rho_deriv(which: int, x):
    return Rho(which).deriv(x)


@lru_cache(maxsize=64)
def compute_c_rho(which: int, tol: float = 1e-10) -> QuadResult:
    """``which=1``: integral of rho_1^2 over [0, 1/2];  ``2``: integral of rho_2 over [1/2, 1]."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if which == 1:
        return integrate(lambda x: RHO1.value(x) ** 2, 0.0, 0.5, tol=tol)
    if which == 2:
        return integrate(RHO2.value, 0.5, 1.0, tol=tol)
    raise ValueError(f"c_rho is defined for which in (1, 2), got {which}")


@dataclass(frozen=True)
class RhoTriple:
    """The rho functions together with their quadrature constants."""

    c_rho1: float
    c_rho1_err: float
    c_rho2: float
    c_rho2_err: float
    rho1: Rho = RHO1
    rho2: Rho = RHO2
    rho3: Rho = RHO3

    @classmethod
    def build(cls, tol: float = 1e-10) -> "RhoTriple":
        c1 = compute_c_rho(1, tol)
        c2 = compute_c_rho(2, tol)
        return cls(c1.value, c1.error, c2.value, c2.error)


# --------------------------------------------------------------------------
# bump families


@dataclass(frozen=True)
class PlateauBump(SmoothScalarFn):
    """Rise over ``[start, start+w]``, plateau ``height`` up to ``start+2w``, fall until ``start+3w``.

    The whole shape is multiplied by ``amplitude`` (negative values flip the sign).
    Its open support is ``(start, start + 3w)``.
    """

    start: float
    width: float
    height: float
    amplitude: float = 1.0

    @property
    def _rise(self):
        return MollifierTheta(self.start, self.start + self.width, 0.0, self.height)

    @property
    def _fall(self):
        return MollifierTheta(self.start + 2 * self.width, self.start + 3 * self.width, 0.0, self.height)

    @property
    def support(self) -> tuple[float, float]:
        return (self.start, self.start + 3 * self.width)

    @property
    def breakpoints(self):
        w = self.width
        return (self.start, self.start + w, self.start + 2 * w, self.start + 3 * w)

    @property
    def sup_bound(self):
        return abs(self.amplitude) * self.height

    @property
    def deriv_bound(self):
        return abs(self.amplitude) * 4.0 * self.height / self.width

    def value(self, x):
        rising = x <= self.start + 2 * self.width
        out = np.where(rising, self._rise.value(x), self.height - self._fall.value(x))
        return self.amplitude * out

    def derivative(self, x):
        rising = x <= self.start + 2 * self.width
        out = np.where(rising, self._rise.derivative(x), -self._fall.derivative(x))
        return self.amplitude * out

    def flipped(self) -> "PlateauBump":
        return PlateauBump(self.start, self.width, self.height, -self.amplitude)


@dataclass(frozen=True)
class BumpSum(SmoothScalarFn):
    """Sum of bumps with pairwise disjoint supports."""

    members: tuple[PlateauBump, ...]

    def value(self, x):
        out = np.zeros(np.shape(x))
        for b in self.members:
            lo, hi = b.support
            mask = (x > lo) & (x < hi)
            if np.any(mask):
                out = out + np.where(mask, b.value(x), 0.0)
        return out

    def derivative(self, x):
        out = np.zeros(np.shape(x))
        for b in self.members:
            lo, hi = b.support
            mask = (x > lo) & (x < hi)
            if np.any(mask):
                out = out + np.where(mask, b.derivative(x), 0.0)
        return out

    @property
    def breakpoints(self):
        return tuple(p for b in self.members for p in b.breakpoints)

    @property
    def sup_bound(self):
        return max((b.sup_bound for b in self.members), default=0.0)

    @property
    def deriv_bound(self):
        return max((b.deriv_bound for b in self.members), default=0.0)


def bump_integral(h: SmoothScalarFn, lo: float, hi: float, tol: float = 1e-13) -> QuadResult:
    """Integral of ``h`` over ``[lo, hi]`` split at its breakpoints."""
    return integrate(h.value, lo, hi, tol=tol, breakpoints=h.breakpoints)


@dataclass(frozen=True)
class BumpFamilySde:
    """m bumps with disjoint supports ((i-1)/(2m), i/(2m)), each integrating to 1/(12m)^2."""

    m: int
    c0: float
    c0_err: float
    members: tuple[PlateauBump, ...]

    def support(self, i: int) -> tuple[float, float]:
        """Open support of member ``i`` (1-based)."""
        return ((i - 1) / (2 * self.m), i / (2 * self.m))

    @property
    def target_integral(self) -> float:
        return 1.0 / (12 * self.m) ** 2

    def signed_sum(self, signs: Sequence[int]) -> BumpSum:
        if len(signs) != self.m:
            raise ValueError("need one sign per member")
        return BumpSum(tuple(b if s > 0 else b.flipped() for b, s in zip(self.members, signs)))


def build_bump_family_sde(m: int, tol: float = 1e-10) -> BumpFamilySde:
    if m < 1:
        raise ValueError(f"family size must be positive, got {m}")
    w = 1.0 / (6 * m)
    base = PlateauBump(0.0, w, w)
    c0 = integrate(base.value, 0.0, 3 * w, tol=tol, breakpoints=base.breakpoints)
    amp = 1.0 / (c0.value * (12 * m) ** 2)
    members = tuple(PlateauBump((i - 1) / (2 * m), w, w, amp) for i in range(1, m + 1))
    return BumpFamilySde(m, c0.value, c0.error, members)


@dataclass(frozen=True)
class BumpFamily1d:
    """2n signed bump pairs on consecutive intervals of length 1/n starting at u^{-1}(z_n)."""

    n: int
    u: object
    z_n: float
    start: float
    plus: tuple[PlateauBump, ...] = field(repr=False)

    @property
    def size(self) -> int:
        return 2 * self.n

    def member(self, i: int, sign: int) -> PlateauBump:
        b = self.plus[i - 1]
        return b if sign > 0 else b.flipped()

    def support(self, i: int) -> tuple[float, float]:
        return (self.start + (i - 1) / self.n, self.start + i / self.n)

    def signed_sum(self, signs: Sequence[int]) -> BumpSum:
        if len(signs) != self.size:
            raise ValueError("need one sign per interval")
        return BumpSum(tuple(self.member(i + 1, s) for i, s in enumerate(signs)))


def build_bump_family_1d(n: int, u) -> BumpFamily1d:
    """``u`` must provide ``u(x)`` and ``u.inverse(y)`` (see :class:`hardsde.growth.GrowthFn`)."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    z_n = max(float(n), float(u(0.0)))
    start = u.inverse(z_n)
    w = 1.0 / (3 * n)
    plus = tuple(PlateauBump(start + (i - 1) / n, w, 1.0 / 12.0) for i in range(1, 2 * n + 1))
    return BumpFamily1d(n, u, z_n, start, plus)


# --------------------------------------------------------------------------
# grid certificates


@dataclass(frozen=True)
class GridCertificate:
    """Worst finite-difference mismatch and observed sup norms on a linear grid."""

    lo: float
    hi: float
    n_points: int
    fd_mismatch: float  # max |f' - central diff| / (1 + |f'|)
    sup: float
    sup_deriv: float
    non_decreasing: bool

    def passes(self, fd_tol: float = 1e-5, sup_bound: float = math.inf, deriv_bound: float = math.inf) -> bool:
        return self.fd_mismatch <= fd_tol and self.sup <= sup_bound and self.sup_deriv <= deriv_bound


def central_diff(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    return (f(x + step) - f(x - step)) / (2.0 * step)


def certify(fn: SmoothScalarFn, lo: float, hi: float, n_points: int = 10_000, step: float = 1e-6) -> GridCertificate:
    """Evaluate ``fn`` on ``linspace(lo, hi, n_points)`` and compare its derivative with central differences."""
    x = np.linspace(lo, hi, n_points)
    d = fn.derivative(x)
    fd = central_diff(fn.value, x, step)
    vals = fn.value(x)
    return GridCertificate(
        lo, hi, n_points,
        float(np.max(np.abs(d - fd) / (1.0 + np.abs(d)))),
        float(np.max(np.abs(vals))),
        float(np.max(np.abs(d))),
        bool(np.all(np.diff(vals) >= 0)),
    )
