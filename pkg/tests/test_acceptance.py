"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run standalone with ``python tests/test_acceptance.py`` or through pytest;
the lines are repeated in the pytest terminal summary.
"""

import time

import numpy as np
import pytest

from ergodic_hjb.core import ScalarField
from ergodic_hjb.ergodic import growth_diagnostics, uniqueness_probe, vanishing_discount
from ergodic_hjb.operators import (PucciParams, log_profile, pucci_from_eigs, pucci_minus,
                                   pucci_plus, radial_derivatives, radial_hessian_eigs)
from ergodic_hjb.oracle import gaussian_average, pucci_sampling
from ergodic_hjb.presets import get_preset, initial_datum
from ergodic_hjb.scheme import FROZEN, BoundaryClosure, apply, closure_values, discretize, residual_values
from ergodic_hjb.solver import march_parabolic, solve_discounted

try:
    from conftest import preset_problem
    from helpers import random_mode, random_problem
except ImportError:                       # standalone run from the repo root
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).parent))
    from conftest import preset_problem
    from helpers import random_mode, random_problem

RESULTS = {}


def report(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_criterion_01_explicit_example():
    t0 = time.perf_counter()
    res = vanishing_discount(preset_problem("paper-example"), delta0=0.2, ladder_factor=0.5,
                             ladder_len=7)
    elapsed = time.perf_counter() - t0
    grid = res.chi.grid
    x = grid.coords[:, 0]
    near = np.abs(x) <= 3.0 + 1e-12
    chi = res.chi.values - res.chi.values[grid.origin_index]
    err = float(np.max(np.abs(chi[near] - np.log1p(x[near] ** 2))))
    ok = abs(res.c) <= 5e-3 and err <= 2e-2 and elapsed <= 10.0
    report(1, ok, f"|c| = {abs(res.c):.2e} (<= 5e-3), chi error on |x|<=3 = {err:.2e} (<= 2e-2), "
                  f"{elapsed:.2f} s")


def test_criterion_02_discounted_bound():
    worst_excess, worst_slack_ratio, n = -np.inf, 0.0, 0
    for name in ("paper-example", "ou-1d", "ou-linear", "pucci-ou", "strong-drift", "constant-cost"):
        p = preset_problem(name)
        runs = [b for b in vanishing_discount(p).bounds]
        for delta in (1.0, 0.1, 0.01):
            s = solve_discounted(p, delta=delta)
            runs.append({"lhs": s.bound_lhs, "l_sup": s.l_sup, "slack": s.closure_slack})
        for b in runs:
            n += 1
            worst_excess = max(worst_excess, b["lhs"] - b["l_sup"] - 1e-8 - b["slack"])
            ratio = b["slack"] / b["l_sup"] if b["l_sup"] > 0 else (0.0 if b["slack"] == 0 else np.inf)
            worst_slack_ratio = max(worst_slack_ratio, ratio)
    ok = worst_excess <= 0 and worst_slack_ratio <= 0.05
    report(2, ok, f"{n} solves, max(delta|u| - |l| - 1e-8 - slack) = {worst_excess:.2e} (<= 0), "
                  f"max slack/|l| = {worst_slack_ratio:.2e} (<= 0.05)")


def test_criterion_03_pucci_oracle():
    t0 = time.perf_counter()
    worst, ident = -np.inf, 0.0
    lower_ok = True
    for lam, Lam in ((1.0, 1.0), (1.0, 2.0), (0.5, 4.0)):
        p = PucciParams(lam, Lam)
        rng = np.random.default_rng(1000 + int(10 * Lam))
        for k in range(100):
            X = rng.uniform(-3, 3, size=(2, 2))
            X = np.triu(X) + np.triu(X, 1).T
            gap = pucci_sampling(X, p, n_samples=10_000, seed=k)["min_val"] - pucci_minus(X, p)
            # admissible samples never undercut M-; allow float rounding only
            lower_ok &= gap >= -1e-12 * Lam * (1 + np.linalg.norm(X, 2))
            worst = max(worst, gap / (0.05 * (1 + np.linalg.norm(X, 2))))
            ident = max(ident, abs(pucci_minus(-X, p) + pucci_plus(X, p)))
            t = float(rng.uniform(0.1, 10))
            ident = max(ident, abs(pucci_minus(t * X, p) - t * pucci_minus(X, p)) / (1 + t),
                        abs(pucci_plus(t * X, p) - t * pucci_plus(X, p)) / (1 + t))
    elapsed = time.perf_counter() - t0
    ok = lower_ok and worst <= 1.0 and ident <= 1e-12 and elapsed <= 5.0
    report(3, ok, f"300 matrices, worst gap / (0.05(1+|X|)) = {worst:.3f} (<= 1), gaps >= 0 to rounding: "
                  f"{bool(lower_ok)}, identities {ident:.1e} (<= 1e-12), {elapsed:.2f} s")


def test_criterion_04_radial_formula():
    radii = np.geomspace(0.05, 50.0, 20)
    worst = 0.0
    for lam, Lam in ((1.0, 1.0), (1.0, 2.0), (0.5, 4.0)):
        p = PucciParams(lam, Lam)
        for N in (1, 2, 3):
            for r in radii:
                simple, repeated, mult = radial_hessian_eigs(log_profile(), r, N)
                got = pucci_from_eigs([simple, repeated], [1, mult], p)
                want = -Lam * (N - 1) / r ** 2 + lam / r ** 2
                worst = max(worst, abs(got - want) / max(1.0, abs(want)))
                if N == 2:
                    _, hess = radial_derivatives(log_profile(), [r * 0.6, r * 0.8])
                    worst = max(worst, abs(pucci_minus(hess, p) - want) / max(1.0, abs(want)))
    report(4, worst <= 1e-12, f"20 radii x N in (1,2,3) x 3 (lambda, Lambda): max rel error "
                              f"{worst:.1e} (<= 1e-12)")


def test_criterion_05_parabolic_ou_average():
    p = preset_problem("ou-linear")
    h = initial_datum("lorentz")
    run = march_parabolic(p, h0=ScalarField.from_function(p.grid, h), T_final=40.0)
    avg = gaussian_average(lambda y: 1.0 / (1.0 + y ** 2), 0.0, 1.0)
    d_avg = abs(run.ubar - avg)
    d_lim = abs(run.ubar - run.ulow)
    spread = max(run.spread_ubar, run.spread_ulow)
    ok = d_avg <= 1e-2 and d_lim <= 1e-3 and spread <= 1e-3
    report(5, ok, f"|ubar - avg| = {d_avg:.2e} (<= 1e-2), |ubar - ulow| = {d_lim:.2e} (<= 1e-3), "
                  f"probe spread = {spread:.2e} (<= 1e-3)")


def test_criterion_06_stabilization_constancy():
    p = preset_problem("pucci-ou")
    details, ok = [], True
    for name in ("sin-gauss", "cos-lorentz"):
        h0 = ScalarField.from_function(p.grid, initial_datum(name))
        run = march_parabolic(p, h0=h0, T_final=40.0)
        spread = max(run.spread_ubar, run.spread_ulow)
        inside = h0.values.min() <= run.ulow <= run.ubar <= h0.values.max()
        ok &= spread <= 1e-3 and inside
        details.append(f"{name}: spread {spread:.1e}, ubar {run.ubar:.4f} in range {inside}")
    report(6, ok, "; ".join(details) + " (spread <= 1e-3)")


def test_criterion_07_uniqueness_probe():
    out = uniqueness_probe(preset_problem("paper-example"), x_ref_a=0.0, x_ref_b=1.0)
    ok = out["delta_c"] <= 1e-3 and out["max_dev_from_constant"] <= 1e-3
    report(7, ok, f"|c_a - c_b| = {out['delta_c']:.2e} (<= 1e-3), chi_a - chi_b deviation = "
                  f"{out['max_dev_from_constant']:.2e} (<= 1e-3)")


def test_criterion_08_bounded_corrector():
    res = vanishing_discount(preset_problem("strong-drift"))
    g = res.growth
    ok = g.verdicts["bounded"] and g.outer_inner_ratio <= 1.05
    report(8, ok, f"bounded verdict {g.verdicts['bounded']}, outer/inner max|chi| = "
                  f"{g.outer_inner_ratio:.4f} (<= 1.05)")


def test_criterion_09_scheme_properties():
    rng = np.random.default_rng(9)
    violations = 0
    for _ in range(1000):
        dim = int(rng.integers(1, 3))
        p = random_problem(rng, dim=dim, mode=random_mode(rng, dim), n=7)
        op = discretize(p)
        delta = float(rng.uniform(0.0, 1.0))
        g = closure_values(op, 0.0, anchor=0.0)
        u = rng.normal(size=p.grid.n_nodes) * 3
        i = int(rng.choice(np.flatnonzero(p.grid.interior)))
        j = int(op.nbr[i, rng.integers(op.nbr.shape[1])])
        base = residual_values(op, u, delta, g)[i]
        v = u.copy()
        v[j] += float(rng.uniform(1e-3, 1.0))
        violations += residual_values(op, v, delta, g)[i] > base
        v = u.copy()
        v[i] += float(rng.uniform(1e-3, 1.0))
        violations += residual_values(op, v, delta, g)[i] < base

    const_res = 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 3))
        p = random_problem(rng, dim=dim, mode=random_mode(rng, dim), zero_cost=True, zero_c0=True)
        r = apply(discretize(p), ScalarField.constant(p.grid, float(rng.uniform(-50, 50))))
        const_res = max(const_res, float(np.max(np.abs(r.values[p.grid.interior]))))

    order_viol = 0
    for _ in range(100):
        dim = int(rng.integers(1, 3))
        p = random_problem(rng, dim=dim, mode=random_mode(rng, dim), n=7, zero_cost=True)
        op = discretize(p, BoundaryClosure(FROZEN))
        h1 = rng.normal(size=p.grid.n_nodes)
        h2 = h1 + rng.uniform(0, 1, size=p.grid.n_nodes)
        r1 = march_parabolic(op, h0=ScalarField(p.grid, h1), T_final=1.0, n_snapshots=10_000)
        r2 = march_parabolic(op, h0=ScalarField(p.grid, h2), T_final=1.0, dt=r1.dt,
                             n_snapshots=10_000)
        order_viol += int(np.any(r1.snapshots > r2.snapshots))

    consist = 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 3))
        mode = random_mode(rng, dim)
        p = random_problem(rng, dim=dim, mode="hjb-inf" if mode.startswith("pucci") else mode,
                           zero_drift=True)
        Q = rng.uniform(-2, 2, size=(dim, dim))
        Q = Q + Q.T
        x = p.grid.coords
        u = 0.5 * np.einsum("mi,ij,mj->m", x, Q, x) + x @ rng.uniform(-2, 2, dim) + 1.0
        got = apply(discretize(p), ScalarField(p.grid, u)).values
        co = p.coefficients
        per = -np.einsum("knij,ji->kn", co.a, Q) + co.c0 * u - co.l
        want = per.min(axis=0) if p.mode.concave else per.max(axis=0)
        inner = p.grid.interior
        consist = max(consist, float(np.max(np.abs(got[inner] - want[inner]))))

    ok = violations == 0 and const_res <= 1e-12 and order_viol == 0 and consist <= 1e-10
    report(9, ok, f"monotonicity violations {violations}/1000, constants residual {const_res:.1e} "
                  f"(<= 1e-12), comparison violations {order_viol}/100, quadratic consistency "
                  f"{consist:.1e} (<= 1e-10)")


def test_criterion_10_shift_covariance():
    base = vanishing_discount(preset_problem("paper-example"))
    shifted = vanishing_discount(preset_problem("paper-example", shift=1.0))
    dc = abs(shifted.c - (base.c - 1.0))
    dchi = float(np.max(np.abs(shifted.chi.values - base.chi.values)))
    report(10, dc <= 1e-6 and dchi <= 1e-8, f"|c' - (c - 1)| = {dc:.1e} (<= 1e-6), "
                                            f"max|chi' - chi| = {dchi:.1e} (<= 1e-8)")


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
