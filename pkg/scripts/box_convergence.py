"""Sensitivity of the ergodic constant to the box size and closure.

Fixed spacing, growing half-width, for the ``paper-example`` and
``strong-drift`` presets under the barrier and frozen-value closures.

    python scripts/box_convergence.py
"""

from ergodic_hjb import BoundaryClosure, build_grid, make_problem, vanishing_discount
from ergodic_hjb.presets import get_preset
from ergodic_hjb.scheme import BARRIER, FROZEN

SPACING = 0.025
LABELS = {BARRIER: "barrier", FROZEN: "frozen"}


def main():
    print(f"{'preset':>14} {'closure':>9} {'L':>5} {'c':>12} {'slack':>10} {'bounded':>8}")
    for name in ("paper-example", "strong-drift"):
        preset = get_preset(name)
        for kind in (BARRIER, FROZEN):
            for L in (3.0, 4.0, 6.0, 8.0):
                n = int(round(2 * L / SPACING)) + 1
                problem = make_problem(preset.fns(), build_grid(1, L, n))
                res = vanishing_discount(problem, closure=BoundaryClosure(kind=kind))
                bounded = res.growth.verdicts["bounded"] if res.growth else None
                print(f"{name:>14} {LABELS[kind]:>9} {L:>5.1f} {res.c:>12.4e} {res.closure_slack:>10.2e} "
                      f"{str(bounded):>8}")


if __name__ == "__main__":
    main()
