"""Discount ladder on the ``paper-example`` preset against the known corrector.

Prints one line per rung and the sup error of ``chi`` against
``log(1 + x^2)`` on ``|x| <= 3`` for a few grid resolutions.

    python scripts/explicit_example_ladder.py
"""

import numpy as np

from ergodic_hjb import build_grid, make_problem, vanishing_discount
from ergodic_hjb.presets import get_preset


def run(n, halfwidth=6.0):
    preset = get_preset("paper-example")
    problem = make_problem(preset.fns(), build_grid(1, halfwidth, n))
    res = vanishing_discount(problem, delta0=0.2, ladder_factor=0.5, ladder_len=7)
    x = res.chi.grid.coords[:, 0]
    chi = res.chi.values - res.chi.values[res.chi.grid.origin_index]
    near = np.abs(x) <= 3.0
    return res, float(np.max(np.abs(chi[near] - np.log1p(x[near] ** 2))))


def main():
    res, err = run(481)
    print(f"{'k':>2} {'delta':>10} {'c_k':>12} {'residual':>10}")
    for k, (d, c, r) in enumerate(zip(res.deltas, res.c_estimates, res.residuals)):
        print(f"{k:>2} {d:>10.3e} {c:>12.4e} {r:>10.1e}")
    print(f"aitken c = {res.c_aitken}")
    print()
    print(f"{'n':>5} {'h':>8} {'|c|':>10} {'chi error':>10}")
    for n in (121, 241, 481, 961):
        res, err = run(n)
        h = res.chi.grid.spacing
        print(f"{n:>5} {h:>8.4f} {abs(res.c):>10.2e} {err:>10.2e}")


if __name__ == "__main__":
    main()
