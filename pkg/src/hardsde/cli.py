"""Command line runner: ``hardsde {verify,oracle,euler,fool-sde,fool-quad,bounds}``.

Every command writes one CSV table (``--out`` or stdout). Exit status is 0 on
success, 1 when a checked property fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from functools import lru_cache
from typing import Any, Iterable, Sequence

import numpy as np

from . import adversary as adv
from . import config as cfgmod
from .growth import (
    GrowthAdmissibility,
    GrowthFn,
    GrowthInversionError,
    ZetaU,
    build_v_n,
    exp_cubed,
    identity,
    join_mismatch,
    v_n_fd_mismatch,
    v_n_rho_integral,
)
from .infoalg import catalog_nodes, fixed_node_rule
from .quadrature import QuadratureError, integrate
from .sde import (
    McConfig,
    QuadratureConfig,
    SdeInstance,
    direct_mc,
    easy_v,
    exact_expectation,
    mc_euler_estimate,
    verify_class_membership,
)
from .smoothfn import (
    RHO1,
    RHO2,
    RHO3,
    CallableFn,
    ConstantFn,
    MollifierEta,
    MollifierTheta,
    build_bump_family_1d,
    build_bump_family_sde,
    certify,
    compute_c_rho,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# --------------------------------------------------------------------------
# shared helpers


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r.get(k)) for k in header])
    return buf.getvalue()


def render_gnuplot(header: Sequence[str], rows: Iterable[dict], columns: Sequence[str]) -> str:
    missing = [c for c in columns if c not in header]
    if len(columns) != 2 or missing:
        raise cfgmod.ConfigError(f"--columns needs two of {list(header)}")
    lines = [f"# {columns[0]} {columns[1]}"]
    lines += [f"{fmt(r.get(columns[0]))} {fmt(r.get(columns[1]))}" for r in rows]
    return "\n".join(lines) + "\n"


def growth_by_name(name: str) -> GrowthFn:
    if name == "exp3":
        return exp_cubed()
    if name == "identity":
        return identity()
    if name == "one-plus-x":
        return GrowthFn(lambda x: 1.0 + x, 50.0, "1+x")
    raise cfgmod.ConfigError(f"unknown growth function {name!r}")


@lru_cache(maxsize=8)
def _zeta(name: str) -> ZetaU:
    return ZetaU(growth_by_name(name))


@lru_cache(maxsize=32)
def hard_v(u_name: str, delta: float, x_delta: float, n: int):
    u = growth_by_name(u_name)
    adm = GrowthAdmissibility.check(u, delta, x_delta)
    return build_v_n(adm, u, n, _zeta(u_name))


def named_instance(name: str) -> SdeInstance:
    """Pinned instances: ``h`` is the m = 1 bump unless stated otherwise."""
    u = exp_cubed()
    h1 = build_bump_family_sde(1).members[0]
    if name == "easy":
        return SdeInstance.build(h1, easy_v(), u)
    if name == "negated-easy":
        return SdeInstance.build(-h1, easy_v(), u)
    if name == "linear":
        return SdeInstance.build(h1, CallableFn(lambda x: x * 1.0, lambda x: np.ones_like(x), "x"), u)
    if name == "constant":
        return SdeInstance.build(h1, ConstantFn(2.0), u)
    if name == "quadratic":
        return SdeInstance.build(h1, CallableFn(lambda x: 1.0 + x * x, lambda x: 2.0 * x, "1+x^2"), u)
    if name == "zero":
        return SdeInstance.build(ConstantFn(0.0), easy_v(), u)
    if name == "hard":
        spec = hard_v("exp3", 1.0, 1.0, 1)
        return SdeInstance.build(build_bump_family_sde(17).members[0], spec.v, u)
    raise cfgmod.ConfigError(f"unknown instance {name!r}")


# --------------------------------------------------------------------------
# verify


class _Checks:
    def __init__(self):
        self.rows: list[dict] = []

    def add(self, check: str, value: float, lower: float | None = None, upper: float | None = None):
        ok = math.isfinite(value) if isinstance(value, float) else True
        if lower is not None:
            ok = ok and value >= lower
        if upper is not None:
            ok = ok and value <= upper
        self.rows.append({"check": check, "value": value, "lower": lower, "upper": upper,
                          "status": "pass" if ok else "fail"})

    def failure(self, check: str, status: str):
        self.rows.append({"check": check, "value": math.nan, "lower": None, "upper": None, "status": status})

    def guarded(self, check: str, fn):
        try:
            fn()
        except QuadratureError:
            self.failure(check, "quadrature-failure")
        except (GrowthInversionError, ArithmeticError, ValueError) as exc:
            self.failure(check, f"error: {type(exc).__name__}")


def _certify_rows(ck: _Checks, label: str, fn, lo, hi, n_pts, sup=None, dsup=None, monotone=False):
    c = certify(fn, lo, hi, n_pts)
    ck.add(f"{label}: fd mismatch", c.fd_mismatch, None, 1e-5)
    if sup is not None:
        ck.add(f"{label}: sup", c.sup, None, sup)
    if dsup is not None:
        ck.add(f"{label}: sup deriv", c.sup_deriv, None, dsup)
    if monotone:
        ck.add(f"{label}: non-decreasing", float(c.non_decreasing), 1.0, None)


def cmd_verify(sec: dict, **_) -> tuple[list[str], list[dict], bool]:
    tol, npts, ns = sec["tol"], sec["grid_points"], sec["n"]
    ck = _Checks()

    def rho_constants():
        c1 = compute_c_rho(1, tol)
        ck.add("c_rho1 in [1/1024, 1/128]", c1.value, 1 / 1024, 1 / 128)
        ck.add("c_rho1 quadrature error", c1.error, None, tol)
        c2 = compute_c_rho(2, tol)
        ck.add("c_rho2 >= 1/64", c2.value, 1 / 64, None)
        ck.add("c_rho2 quadrature error", c2.error, None, tol)

    ck.guarded("rho constants", rho_constants)

    for label, fn, lo, hi in [
        ("eta(0,1)", MollifierEta(0.0, 1.0), -5.0, 2.0),
        ("eta(2,0.5)", MollifierEta(2.0, 0.5), -3.0, 4.0),
        ("theta(0,1,0,1)", MollifierTheta(0.0, 1.0, 0.0, 1.0), -2.0, 3.0),
        ("theta(0,2,-1,3)", MollifierTheta(0.0, 2.0, -1.0, 3.0), -2.0, 4.0),
    ]:
        _certify_rows(ck, label, fn, lo, hi, npts, fn.sup_bound, fn.deriv_bound, monotone=True)
    for i, r in enumerate((RHO1, RHO2, RHO3), start=1):
        _certify_rows(ck, f"rho{i}", r, -3.0, 3.0, npts, 1.0, 1.0)
    x = np.linspace(-5.0, 5.0, npts)
    ck.add("rho3 odd: max |rho3(x)+rho3(-x)|", float(np.max(np.abs(RHO3.value(x) + RHO3.value(-x)))), None, 0.0)
    ck.add("rho1 = 0 on [1/2, 3]", float(np.max(np.abs(RHO1.value(np.linspace(0.5, 3, npts))))), None, 0.0)
    ck.add("rho2 = 0 on [-3, 1/2]", float(np.max(np.abs(RHO2.value(np.linspace(-3, 0.5, npts))))), None, 0.0)
    ck.add("rho3 >= rho3(1)/2 on [1/2, 1]",
           float(np.min(RHO3.value(np.linspace(0.5, 1, npts))) - RHO3(1.0) / 2), 0.0, None)

    for m in (1, 5, 17):
        def bumps(m=m):
            fam = build_bump_family_sde(m, tol)
            grid = np.linspace(-0.25, 0.75, npts)
            ints = [integrate(h.value, 0.0, 0.5, tol=1e-14, breakpoints=h.breakpoints).value for h in fam.members]
            ck.add(f"bumps m={m}: max |int h_i - 1/(12m)^2|",
                   max(abs(v - fam.target_integral) for v in ints), None, 1e-8)
            vals = np.array([h.value(grid) for h in fam.members])
            overlap = max((float(np.max(np.abs(vals[i] * vals[j]))) for i in range(m) for j in range(i + 1, m)),
                          default=0.0)
            ck.add(f"bumps m={m}: max pairwise product", overlap, None, 0.0)
            ck.add(f"bumps m={m}: c0 >= 1/(6m)^2", fam.c0, 1 / (6 * m) ** 2, None)
            worst_fd = max(certify(h, h.support[0] - 2, h.support[1] + 2, npts).fd_mismatch for h in fam.members)
            ck.add(f"bumps m={m}: fd mismatch", worst_fd, None, 1e-5)
            ck.add(f"bumps m={m}: sup", float(np.max(np.abs(vals))), None, 1.0)
            ck.add(f"bumps m={m}: sup deriv",
                   max(float(np.max(np.abs(h.derivative(grid)))) for h in fam.members), None, 1.0)

        ck.guarded(f"bumps m={m}", bumps)

    u = exp_cubed()
    for n in ns:
        def bumps1d(n=n):
            fam = build_bump_family_1d(n, u)
            worst, ratio = 0.0, 0.0
            for i in range(1, fam.size + 1):
                h = fam.member(i, 1)
                lo, hi = fam.support(i)
                worst = max(worst, certify(h, lo - 2, hi + 2, npts).fd_mismatch)
                xs = np.linspace(lo, hi, npts)
                ratio = max(ratio, float(np.max(np.abs(h.derivative(xs)) / u(xs))))
            ck.add(f"1-d bumps n={n}: fd mismatch", worst, None, 1e-5)
            ck.add(f"1-d bumps n={n}: max |h'|/u on support", ratio, None, 1.0)
            lo, hi = fam.support(1)
            lhs = integrate(lambda t: np.sin(fam.member(1, 1).value(t)) * np.exp(-t * t / 2), lo, hi,
                            tol=1e-15, breakpoints=fam.member(1, 1).breakpoints).value
            rhs = math.sin(1 / 12) * math.exp(-4) / 3 * math.exp(-fam.start**2) / n
            ck.add(f"1-d bumps n={n}: int sin(h_1) e^(-x^2/2) - bound", lhs - rhs, 0.0, None)

        ck.guarded(f"1-d bumps n={n}", bumps1d)

    def zeta_checks():
        z = _zeta("exp3")
        ck.add("zeta_u(1)", z(1.0), 0.0, 0.0)
        xs = np.linspace(1.001, z.finite_limit, 400)
        zs = z(xs)
        ck.add("zeta_u strictly increasing (min step)", float(np.min(np.diff(zs))), 1e-300, None)
        xg = np.linspace(2.0, min(z.finite_limit, 6.0) - 1e-3, 200)
        dz = np.array([(z(t + 1e-6) - z(t - 1e-6)) / 2e-6 for t in xg])
        ck.add("zeta_u' - sqrt(delta)/2 for x >= x_delta+1", float(np.min(dz)) - 0.5, -1e-6, None)
        bound = np.array([u(max(t - 1.0, 1.0)) for t in xs])
        ck.add("zeta_u(x) - u(max(x-1, x_delta))/sqrt(delta)", float(np.max(zs - bound)), None, 0.0)

    ck.guarded("zeta_u", zeta_checks)

    for n in ns:
        def vn(n=n):
            spec = hard_v("exp3", 1.0, 1.0, n)
            xs = np.linspace(-5.0, spec.alpha_n + 5.0, npts)
            vals, ders = spec.v.value(xs), spec.v.derivative(xs)
            w = 1.0 + u(np.abs(xs))
            ck.add(f"v_{n}: min increment on grid", float(np.min(np.diff(vals))), 0.0, None)
            ck.add(f"v_{n}: min value", float(np.min(vals)), 1e-300, None)
            ck.add(f"v_{n}: max v - (1+u)", float(np.max(vals - w)), None, 0.0)
            ck.add(f"v_{n}: max v' - (1+u)", float(np.max(ders - w)), None, 0.0)
            ck.add(f"v_{n}: int rho3(v/beta) - rho3(1)/4", v_n_rho_integral(spec) - RHO3(1.0) / 4, -1e-6, None)
            ck.add(f"v_{n}: alpha_n - k_n in (1, 2]", spec.alpha_n - spec.k_n, 1.0 + 1e-15, 2.0)
            ck.add(f"v_{n}: fd mismatch (high precision)", v_n_fd_mismatch(spec, xs), None, 1e-5)
            ck.add(f"v_{n}: max join mismatch", join_mismatch(spec), None, 1e-9)
            rep = verify_class_membership(named_instance("hard") if n == 1 else
                                          SdeInstance.build(build_bump_family_sde(17 * n).members[0], spec.v, u))
            ck.add(f"class membership (h_1, v_{n}): failures", float(len(rep.failures)), None, 0.0)

        ck.guarded(f"v_{n}", vn)

    header = ["check", "value", "lower", "upper", "status"]
    return header, ck.rows, all(r["status"] == "pass" for r in ck.rows)


# --------------------------------------------------------------------------
# oracle


def cmd_oracle(sec: dict, seed: int | None = None, **_):
    seed = sec["seed"] if seed is None else seed
    rows, ok = [], True
    for k, name in enumerate(sec["instances"]):
        inst = named_instance(name)
        ex = exact_expectation(inst)
        mc = direct_mc(inst, sec["n_samples"], seed + k)
        diff = mc.estimate - ex.value
        z = diff / mc.std_error if mc.std_error > 0 else (0.0 if diff == 0 else math.inf)
        # the reference itself is only known to within its certified error
        passed = abs(diff) <= 4.0 * mc.std_error + ex.err_bound
        ok &= passed
        rows.append({"instance": name, "n_samples": sec["n_samples"], "exact": ex.value, "exact_err": ex.err_bound,
                     "mc_mean": mc.estimate, "std_error": mc.std_error, "z_score": z,
                     "status": "pass" if passed else "fail"})
    header = ["instance", "n_samples", "exact", "exact_err", "mc_mean", "std_error", "z_score", "status"]
    return header, rows, ok


# --------------------------------------------------------------------------
# euler


def cmd_euler(sec: dict, seed: int | None = None, threads: int = 1, **_):
    seed = sec["seed"] if seed is None else seed
    u = growth_by_name(sec["u"])
    rows = []
    for name in sec["instances"]:
        inst = named_instance(name)
        ex = exact_expectation(inst)
        for n_steps in sec["n_steps"]:
            res = mc_euler_estimate(inst, McConfig(n_steps, sec["replications"], seed), threads=threads)
            try:
                lb = adv.log_theorem_bound_sde(u, sec["delta"], sec["x_delta"], res.cost)
            except (GrowthInversionError, ValueError):
                lb = None
            rows.append({"instance": name, "n_steps": n_steps, "replications": sec["replications"],
                         "cost": res.cost, "estimate": res.estimate, "exact": ex.value,
                         "abs_error": abs(res.estimate - ex.value), "std_error": res.std_error,
                         "theorem_bound_logspace": lb})
    header = ["instance", "n_steps", "replications", "cost", "estimate", "exact", "abs_error", "std_error",
              "theorem_bound_logspace"]
    return header, rows, True


# --------------------------------------------------------------------------
# fooling


def cmd_fool_sde(sec: dict, **_):
    u = growth_by_name(sec["u"])
    rows, ok = [], True
    for n in sec["n"]:
        v = hard_v(sec["u"], sec["delta"], sec["x_delta"], n).v if sec["v"] == "hard" else easy_v()
        t = catalog_nodes(sec["rule"], n, sec["lo"], sec["hi"])
        rule = fixed_node_rule([(0.0, 0.0, 0.0, float(s)) for s in t], name=sec["rule"])
        rep = adv.fool_deterministic_sde_rule(rule, n, v, u)
        J = len(rep.untouched_set)
        passed = J >= rep.m - rep.cost and rep.measured_gap >= J * rep.epsilon - 1e-8 and bool(rep.fooled)
        ok &= passed
        rows.append({"n": n, "m": rep.m, "rule": sec["rule"], "nodes": rep.cost, "touched": len(rep.touched_set),
                     "untouched": J, "epsilon": rep.epsilon, "measured_gap": rep.measured_gap,
                     "det_bound": rep.det_bound, "ran_bound": rep.ran_bound, "prop1_bound": rep.bound_value,
                     "fooled": rep.fooled, "status": "pass" if passed else "fail"})
    header = ["n", "m", "rule", "nodes", "touched", "untouched", "epsilon", "measured_gap", "det_bound",
              "ran_bound", "prop1_bound", "fooled", "status"]
    return header, rows, ok


def cmd_fool_quad(sec: dict, **_):
    u = growth_by_name(sec["u"])
    rows, ok = [], True
    for n in sec["n"]:
        fam = build_bump_family_1d(n, u)
        lo = fam.start if sec["lo"] is None else sec["lo"]
        hi = fam.start + 2.0 if sec["hi"] is None else sec["hi"]
        nodes = catalog_nodes(sec["rule"], n, lo, hi)
        rep = adv.fool_deterministic_quadrature(nodes, n, u)
        J = len(rep.untouched_set)
        passed = (J >= 2 * n - len(nodes) and rep.integrand_gap >= J * rep.epsilon - 1e-8
                  and rep.epsilon >= rep.eps_lemma)
        ok &= passed
        rows.append({"n": n, "intervals": 2 * n, "rule": sec["rule"], "nodes": len(nodes),
                     "touched": len(rep.touched_set), "untouched": J, "epsilon": rep.epsilon,
                     "eps_lemma": rep.eps_lemma, "integrand_gap": rep.integrand_gap, "det_bound": rep.bound_value,
                     "log_theorem_bound_1d": adv.log_theorem_bound_1d(u, n), "status": "pass" if passed else "fail"})
    header = ["n", "intervals", "rule", "nodes", "touched", "untouched", "epsilon", "eps_lemma", "integrand_gap",
              "det_bound", "log_theorem_bound_1d", "status"]
    return header, rows, ok


def cmd_bounds(sec: dict, **_):
    u = growth_by_name(sec["u"])
    rows = []
    for n in sec["n"]:
        row: dict[str, Any] = {"n": n, "status": "ok"}
        try:
            row["sde_log_bound"] = adv.log_theorem_bound_sde(u, sec["delta"], sec["x_delta"], n)
            row["sde_log_bound_proof_constant"] = adv.log_theorem_bound_sde(
                u, sec["delta"], sec["x_delta"], n, adv.PROOF_CONSTANT)
            row["sde_bound"] = math.exp(row["sde_log_bound"])
        except (GrowthInversionError, ValueError):
            row["status"] = "inversion-failure"
        try:
            row["one_d_log_bound"] = adv.log_theorem_bound_1d(u, n)
            row["one_d_bound"] = math.exp(row["one_d_log_bound"])
        except GrowthInversionError:
            row["status"] = "inversion-failure"
        rows.append(row)
    header = ["n", "sde_bound", "sde_log_bound", "sde_log_bound_proof_constant", "one_d_bound", "one_d_log_bound",
              "status"]
    return header, rows, True


COMMANDS = {
    "verify": ("verify", cmd_verify),
    "oracle": ("oracle", cmd_oracle),
    "euler": ("euler", cmd_euler),
    "fool-sde": ("fool-sde", cmd_fool_sde),
    "fool-quad": ("fool-quad", cmd_fool_quad),
    "bounds": ("bounds", cmd_bounds),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hardsde", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH", help="INI file with one section per experiment")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed (overrides the config)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads; never changes results")
    p.add_argument("--format", choices=("csv", "gnuplot"), default="csv")
    p.add_argument("--columns", default="", metavar="X,Y", help="the two columns for --format gnuplot")
    p.add_argument("--print-config", action="store_true", help="print the normalized config and exit")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("--seed must be a 64-bit unsigned integer")
        if args.threads < 1:
            raise cfgmod.ConfigError("--threads must be positive")
        cfg = cfgmod.load(args.config)
        section_name, fn = COMMANDS[args.command]
        sec = cfgmod.section(cfg, section_name)
        if args.print_config:
            sys.stdout.write(cfgmod.normalize({section_name: sec}))
            return EXIT_OK
        header, rows, ok = fn(sec, seed=args.seed, threads=args.threads)
        if args.format == "gnuplot":
            text = render_gnuplot(header, rows, [c.strip() for c in args.columns.split(",") if c.strip()])
        else:
            text = render_csv(header, rows)
    except cfgmod.ConfigError as exc:
        print(f"hardsde: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
