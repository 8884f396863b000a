"""Growth functions u, their inverse, the cumulative-root map zeta_u and the adversarial v_n."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quadrature import QuadratureError, integrate
from .smoothfn import MollifierEta, MollifierTheta, SmoothScalarFn

DEFAULT_DOMAIN_CAP = 50.0


class GrowthInversionError(ValueError):
    """The target value is not reached below the declared domain cap."""


class AdmissibilityError(ValueError):
    """``inf_{x >= x_delta} u(x)/x >= delta`` fails on the verification grid."""


@dataclass(frozen=True)
class GrowthFn:
    """Strictly increasing continuous ``u: [0, inf) -> [0, inf)`` given as a vectorised callable.

    Overflow inside ``fn`` is reported as ``inf``; inversion never searches past
    ``domain_cap``.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    domain_cap: float = DEFAULT_DOMAIN_CAP
    description: str = "u"

    def __call__(self, x):
        with np.errstate(over="ignore"):
            out = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        return float(out) if np.ndim(x) == 0 else out

    def inverse(self, y: float, tol: float = 1e-12) -> float:
        return invert_growth(self, y, tol)

    def is_strictly_increasing(self, n_grid: int = 10_000, upper: float | None = None) -> bool:
        hi = self.domain_cap if upper is None else upper
        vals = self(np.linspace(0.0, hi, n_grid))
        finite = np.isfinite(vals)
        return bool(np.all(np.diff(vals[finite]) > 0) and np.all(vals >= 0))


def exp_cubed(domain_cap: float = DEFAULT_DOMAIN_CAP) -> GrowthFn:
    """The default admissible demo growth ``u(x) = exp(x^3)``."""
    return GrowthFn(lambda x: np.exp(x**3), domain_cap, "exp(x^3)")


def identity(domain_cap: float = DEFAULT_DOMAIN_CAP) -> GrowthFn:
    return GrowthFn(lambda x: x * 1.0, domain_cap, "x")


def invert_growth(u: GrowthFn, y: float, tol: float = 1e-12) -> float:
    """Solve ``u(x) = y`` to ``|u(x) - y| <= tol*(1+y)`` by bracket doubling and bisection.

    Returns the best bisection point if the bracket collapses to floating point
    resolution first (steep ``u``).
    """
    target = tol * (1.0 + abs(y))
    u0 = u(0.0)
    if y < u0 - target:
        raise GrowthInversionError(f"{y!r} is below u(0) = {u0!r}")
    if abs(u0 - y) <= target:
        return 0.0
    lo, hi = 0.0, min(1.0, u.domain_cap)
    while u(hi) < y:
        if hi >= u.domain_cap:
            raise GrowthInversionError(
                f"u({u.domain_cap:g}) = {u(u.domain_cap):.6g} < {y:.6g}; raise domain_cap for {u.description}"
            )
        lo, hi = hi, min(2.0 * hi, u.domain_cap)
    if abs(u(hi) - y) <= target:
        return hi
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        um = u(mid)
        if abs(um - y) <= target:
            return mid
        if um < y:
            lo = mid
        else:
            hi = mid
    return lo if abs(u(lo) - y) <= abs(u(hi) - y) else hi


@dataclass(frozen=True)
class GrowthAdmissibility:
    delta: float
    x_delta: float
    kappa_delta: float

    @classmethod
    def check(cls, u: GrowthFn, delta: float, x_delta: float, n_grid: int = 10_000) -> "GrowthAdmissibility":
        """Verify ``u(x)/x >= delta`` on a linear grid over ``[x_delta, domain_cap]``."""
        if not (delta > 0 and x_delta > 0):
            raise AdmissibilityError("delta and x_delta must be positive")
        xs = np.linspace(x_delta, u.domain_cap, n_grid)
        with np.errstate(over="ignore"):
            ratio = u(xs) / xs
        worst = float(np.min(ratio))
        if worst < delta:
            raise AdmissibilityError(f"inf u(x)/x on grid is {worst:.6g} < delta = {delta:g}")
        kappa = 8.0 / math.sqrt(delta) * max(u(x_delta + 1.0), 1.0)
        return cls(delta, x_delta, kappa)


class ZetaU:
    """``zeta_u(x) = sqrt(int_0^{x-1} u)`` on ``[1, domain_cap]`` backed by a cumulative knot table.

    Panel integrals are computed to ``tol * max(1, |panel|)``. Where the integral
    overflows the table stops and ``zeta_u`` reports ``inf``.
    """

    def __init__(self, u: GrowthFn, step: float = 1.0 / 16.0, tol: float = 1e-13):
        self.u = u
        self.step = step
        self.tol = tol
        top = u.domain_cap - 1.0
        n_panels = int(math.floor(top / step))
        knots = [0.0]
        cum = [0.0]
        errs = [0.0]
        for k in range(n_panels):
            a, b = k * step, (k + 1) * step
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    r = integrate(u.fn, a, b, tol=tol, rel_tol=tol)
            except QuadratureError:
                break
            total = cum[-1] + r.value
            if not math.isfinite(total):
                break
            knots.append(b)
            cum.append(total)
            errs.append(errs[-1] + r.error)
        self.knots = np.array(knots)
        self.cumulative = np.array(cum)
        self.cumulative_err = np.array(errs)

    @property
    def finite_limit(self) -> float:
        """Largest x (not beyond domain_cap) with a tabulated, finite ``zeta_u(x)``."""
        return 1.0 + float(self.knots[-1])

    def _partial(self, k: int, t: float) -> float:
        a = float(self.knots[k])
        if t == a:
            return 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            return integrate(self.u.fn, a, t, tol=self.tol, rel_tol=self.tol).value

    def squared(self, x: float) -> float:
        t = float(x) - 1.0
        if t < 0:
            raise ValueError(f"zeta_u is defined on [1, inf), got {x}")
        if t > self.knots[-1]:
            return math.inf
        k = min(int(t // self.step), len(self.knots) - 1)
        while k > 0 and self.knots[k] > t:
            k -= 1
        return float(self.cumulative[k]) + self._partial(k, t)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return math.sqrt(self.squared(x))
        return np.sqrt(np.array([self.squared(xi) for xi in np.ravel(x)])).reshape(np.shape(x))

    def deriv(self, x: float) -> float:
        """``u(x-1) / (2 zeta_u(x))`` for ``x > 1``."""
        return self.u(float(x) - 1.0) / (2.0 * self(x))

    def invert(self, y: float, tol: float = 1e-12) -> float:
        """Return ``x >= 1`` with ``|zeta_u(x) - y| <= tol * max(1, y)``."""
        if y < 0:
            raise ValueError("zeta_u takes values in [0, inf)")
        if y == 0:
            return 1.0
        target = y * y
        if target > self.cumulative[-1]:
            raise GrowthInversionError(
                f"zeta_u^(-1)({y:.6g}) lies beyond the finite table limit x = {self.finite_limit:g}"
            )
        k = int(np.searchsorted(self.cumulative, target, side="right")) - 1
        k = min(max(k, 0), len(self.knots) - 2)
        lo, hi = float(self.knots[k]), float(self.knots[k + 1])
        slack = tol * max(1.0, y)
        base = float(self.cumulative[k])
        for _ in range(2000):
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            z = math.sqrt(base + self._partial(k, mid))
            if abs(z - y) <= slack:
                return 1.0 + mid
            if z < y:
                lo = mid
            else:
                hi = mid
        return 1.0 + 0.5 * (lo + hi)


def zeta_eval(z: ZetaU, x):
    return z(x)


def zeta_invert(z: ZetaU, y: float, tol: float = 1e-12) -> float:
    return z.invert(y, tol)


# --------------------------------------------------------------------------
# the adversarial v_n


@dataclass(frozen=True)
class PiecewiseMollified(SmoothScalarFn):
    """``scale * piece_j(x)`` on ``[lefts[j], lefts[j+1])``; ``lefts[0] = -inf``.

    Right of ``lefts[-1] + 1`` (beyond the tabulated pieces) the value is ``inf``.
    """

    lefts: tuple[float, ...]
    pieces: tuple[SmoothScalarFn, ...]
    scale: float
    right_end: float = math.inf

    @property
    def breakpoints(self):
        return tuple(p for p in self.lefts[1:]) + ((self.right_end,) if math.isfinite(self.right_end) else ())

    def _eval(self, x, method):
        shape = np.shape(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.searchsorted(np.asarray(self.lefts), x, side="right") - 1
        out = np.full(x.shape, np.inf if method == "value" else np.nan)
        for j in np.unique(idx):
            mask = idx == j
            out[mask] = self.scale * getattr(self.pieces[j], method)(x[mask])
        beyond = x > self.right_end
        out[beyond] = np.inf if method == "value" else np.nan
        return out.reshape(shape)

    def value(self, x):
        return self._eval(x, "value")

    def derivative(self, x):
        return self._eval(x, "derivative")


@dataclass(frozen=True)
class VnSpec:
    n: int
    adm: GrowthAdmissibility
    alpha_n: float
    beta_n: float
    k_n: int
    zeta_alpha: float
    v: PiecewiseMollified = field(repr=False)

    @property
    def pieces(self):
        return list(zip(self.v.lefts, self.v.pieces))


def beta(n: int) -> float:
    q = 102.0 * n
    return (1.0 + 16.0 * q**4) / (4.0 * q**2)


def build_v_n(adm: GrowthAdmissibility, u: GrowthFn, n: int, zeta: ZetaU | None = None) -> VnSpec:
    """The strictly increasing, growth-dominated ``v_n`` whose mass near ``alpha_n`` defeats n queries."""
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    z = ZetaU(u) if zeta is None else zeta
    kappa, sd = adm.kappa_delta, math.sqrt(adm.delta)
    b = beta(n)
    alpha = z.invert(kappa * b)
    if alpha < adm.x_delta + 2.0:
        raise ValueError(f"alpha_n = {alpha:g} < x_delta + 2; admissibility data inconsistent")
    k_n = math.ceil(alpha - 1.0) - 1
    if not 1.0 < alpha - k_n <= 2.0:
        raise AssertionError(f"alpha_n - k_n = {alpha - k_n} outside (1, 2]")
    z_alpha = z(alpha)
    mid_level = z_alpha - sd / 4.0
    if not mid_level > z(alpha - 1.0):
        raise ValueError("zeta_u increment over [alpha_n - 1, alpha_n] below sqrt(delta)/4")

    lefts: list[float] = [-math.inf]
    pieces: list[SmoothScalarFn] = [MollifierEta(alpha - k_n, z(alpha - k_n))]
    for k in range(-k_n, -1):
        lefts.append(alpha + k)
        pieces.append(MollifierTheta(alpha + k, alpha + k + 1, z(alpha + k), z(alpha + k + 1)))
    lefts.append(alpha - 1.0)
    pieces.append(MollifierTheta(alpha - 1.0, alpha - 0.5, z(alpha - 1.0), mid_level))
    lefts.append(alpha - 0.5)
    pieces.append(MollifierTheta(alpha - 0.5, alpha, mid_level, z_alpha))
    # unit ladder to the right of alpha_n, as far as zeta_u is finite
    k = 0
    lo_val = z_alpha
    while alpha + k + 1 <= z.finite_limit:
        hi_val = z(alpha + k + 1)
        if not math.isfinite(hi_val):
            break
        lefts.append(alpha + k)
        pieces.append(MollifierTheta(alpha + k, alpha + k + 1, lo_val, hi_val))
        lo_val = hi_val
        k += 1
    v = PiecewiseMollified(tuple(lefts), tuple(pieces), 1.0 / kappa, right_end=alpha + k)
    return VnSpec(n, adm, alpha, b, k_n, z_alpha, v)


def v_n_rho_integral(spec: VnSpec, tol: float = 1e-12) -> float:
    """``int_0^{alpha_n} rho_3(v_n(x) / beta_n) dx``."""
    from .smoothfn import RHO3

    f = lambda x: RHO3.value(spec.v.value(x) / spec.beta_n)
    return integrate(f, 0.0, spec.alpha_n, tol=tol, breakpoints=spec.v.breakpoints).value


# --------------------------------------------------------------------------
# constructive growth functions


def eps_knots(eps: Sequence[float], c2: float) -> tuple[int, np.ndarray]:
    """Return ``n0`` and ``b_n = sqrt(ln(1/eps_n)/c2)`` for ``n = n0..N`` (1-based indices)."""
    e = np.asarray(eps, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("need at least two terms of the sequence")
    if np.any(e <= 0) or np.any(np.diff(e) >= 0):
        raise ValueError("eps must be positive and strictly decreasing")
    ok = np.nonzero(e <= math.exp(-4.0 * c2))[0]
    if ok.size == 0:
        raise ValueError(f"no term satisfies eps_n <= exp(-4 c2) = {math.exp(-4.0 * c2):.6g}")
    n0 = int(ok[0]) + 1
    b = np.sqrt(np.log(1.0 / e[n0 - 1:]) / c2)
    return n0, b


def build_u_from_eps(eps: Sequence[float], c2: float, c3: float) -> GrowthFn:
    """Piecewise linear u with ``u(b_n) >= 4 c3 n^4``; identity up to ``b_{n0}``, slope 1 past ``b_N``."""
    n0, b = eps_knots(eps, c2)
    xs = [0.0, float(b[0])]
    us = [0.0, float(b[0])]
    for j in range(1, len(b)):
        n = n0 + j - 1
        db = float(b[j] - b[j - 1])
        slope = max(1.0, (4.0 * c3 * (n + 1) ** 4 - us[-1]) / db)
        xs.append(float(b[j]))
        us.append(us[-1] + db * slope)
    xs_a, us_a = np.array(xs), np.array(us)
    x_last, u_last = xs[-1], us[-1]

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= x_last, np.interp(x, xs_a, us_a), u_last + (x - x_last))

    cap = max(DEFAULT_DOMAIN_CAP, 2.0 * x_last, u_last + 1.0)
    return GrowthFn(fn, cap, f"piecewise-linear u from eps (n0={n0})")


def build_u_lin_n(n: int, c3: float) -> GrowthFn:
    """``c3*x`` on [0, 2], then linear with ``u(3) = 4 c3^2 n^4``."""
    if n < 1 or c3 < 1:
        raise ValueError("need n >= 1 and c3 >= 1")
    top = 4.0 * c3**2 * n**4

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 2.0, c3 * x, 2.0 * c3 + (top - 2.0 * c3) * (x - 2.0))

    return GrowthFn(fn, DEFAULT_DOMAIN_CAP, f"u_lin(n={n}, c3={c3:g})")


def v_n_mp(spec: VnSpec, x, dps: int = 50):
    """``v_n(x)`` re-evaluated from the piece parameters in ``dps``-digit arithmetic.

    Used as a cancellation-free reference for finite differences where ``v_n`` is
    large. Returns an ``mpmath.mpf``.
    """
    import mpmath as mp

    with mp.workdps(dps):
        x = mp.mpf(x)
        lefts = spec.v.lefts
        j = 0
        while j + 1 < len(lefts) and lefts[j + 1] <= x:
            j += 1
        p = spec.v.pieces[j]
        if isinstance(p, MollifierEta):
            tau, v = mp.mpf(p.tau), mp.mpf(p.v)
            val = v * (1 - mp.exp(1 / (x - tau))) if x < tau else v
        else:
            t1, t2, v1, v2 = (mp.mpf(c) for c in (p.tau1, p.tau2, p.v1, p.v2))
            if x <= t1:
                val = v1
            elif x >= t2:
                val = v2
            else:
                d = t2 - t1
                val = v1 + (v2 - v1) / (1 + mp.exp(d / (x - t1) - d / (t2 - x)))
        return val / mp.mpf(spec.adm.kappa_delta)


def v_n_fd_mismatch(spec: VnSpec, x: np.ndarray, step: float = 1e-9, extra_digits: int = 40) -> float:
    """``max |v_n'(x) - central diff| / (1 + |v_n'(x)|)`` with the difference taken in high precision.

    The working precision is ``extra_digits`` beyond the magnitude of ``v_n(x)``,
    so that even the absolute floor of the comparison is resolved where ``v_n`` is
    huge. The small default step keeps the truncation error negligible where a
    piece of huge amplitude is steep.
    """
    import mpmath as mp

    x = np.ravel(np.asarray(x, dtype=float))
    d = spec.v.derivative(x)
    vals = np.abs(spec.v.value(x))
    worst = 0.0
    for xi, di, vi in zip(x, d, vals):
        dps = extra_digits + max(0, math.ceil(math.log10(1.0 + vi)))
        with mp.workdps(dps):
            h = mp.mpf(step)
            fd = (v_n_mp(spec, mp.mpf(xi) + h, dps) - v_n_mp(spec, mp.mpf(xi) - h, dps)) / (2 * h)
            worst = max(worst, float(abs(mp.mpf(di) - fd) / (1 + abs(mp.mpf(di)))))
    return worst


def join_mismatch(spec: VnSpec) -> float:
    """Largest ``|left piece - right piece|`` at the interior knots of ``v_n`` (scaled by 1/kappa)."""
    v = spec.v
    worst = 0.0
    for j in range(1, len(v.lefts)):
        knot = v.lefts[j]
        worst = max(worst, abs(v.pieces[j - 1](knot) - v.pieces[j](knot)) * v.scale)
    return worst
