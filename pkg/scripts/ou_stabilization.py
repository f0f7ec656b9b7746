"""Long-time behaviour of the parabolic problem on two presets.

``ou-linear``: the tail level against the Gaussian average of the initial
datum.  ``pucci-ou``: tail spread for several initial data.

    python scripts/ou_stabilization.py
"""

from ergodic_hjb import ScalarField, build_grid, make_problem, march_parabolic
from ergodic_hjb.oracle import gaussian_average
from ergodic_hjb.presets import get_preset, initial_datum


def preset_problem(name):
    p = get_preset(name)
    grid = build_grid(p.dim, p.halfwidth, p.n_per_dim)
    return p, make_problem(p.fns(), grid, mode=p.mode, pucci_lambda=p.pucci_lambda,
                           pucci_Lambda=p.pucci_Lambda)


def main():
    preset, problem = preset_problem("ou-linear")
    mean, var = preset.gaussian(preset.params())
    print("ou-linear")
    print(f"{'h0':>12} {'T':>6} {'ubar':>10} {'ulow':>10} {'gauss avg':>10}")
    for name in ("lorentz", "cos-lorentz"):
        h = initial_datum(name)
        avg = gaussian_average(lambda y: h(y[:, None]), mean, var)
        for T in (10.0, 20.0, 40.0):
            run = march_parabolic(problem, h0=ScalarField.from_function(problem.grid, h), T_final=T)
            print(f"{name:>12} {T:>6.0f} {run.ubar:>10.6f} {run.ulow:>10.6f} {avg:>10.6f}")

    _, problem = preset_problem("pucci-ou")
    print()
    print("pucci-ou")
    print(f"{'h0':>12} {'ubar':>10} {'ulow':>10} {'spread':>10}")
    for name in ("sin-gauss", "cos-lorentz", "lorentz", "tanh"):
        h0 = ScalarField.from_function(problem.grid, initial_datum(name))
        run = march_parabolic(problem, h0=h0, T_final=40.0)
        spread = max(run.spread_ubar, run.spread_ulow)
        print(f"{name:>12} {run.ubar:>10.6f} {run.ulow:>10.6f} {spread:>10.2e}")


if __name__ == "__main__":
    main()
