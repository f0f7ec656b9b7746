"""Random problem generators shared by the scheme and acceptance tests."""

import numpy as np

from ergodic_hjb.core import Coefficients, ControlSet, ProblemSpec, build_grid


def random_problem(rng, dim=1, mode="hjb-inf", n=9, L=2.0, K=None, drift=3.0, c0_max=1.0,
                   zero_cost=False, zero_drift=False, zero_c0=False):
    grid = build_grid(dim, L, n)
    K = int(rng.integers(1, 4)) if K is None else K
    m = grid.n_nodes
    diag = rng.uniform(0.0, 2.0, size=(K, m, dim))
    a = np.zeros((K, m, dim, dim))
    for d in range(dim):
        a[..., d, d] = diag[..., d]
    b = np.zeros((K, m, dim)) if zero_drift else rng.uniform(-drift, drift, size=(K, m, dim))
    c0 = np.zeros((K, m)) if zero_c0 else rng.uniform(0.0, c0_max, size=(K, m))
    l = np.zeros((K, m)) if zero_cost else rng.uniform(-2.0, 2.0, size=(K, m))
    lam = float(rng.uniform(0.2, 1.0))
    Lam = lam * float(rng.uniform(1.0, 4.0))
    return ProblemSpec(grid, ControlSet(tuple(range(K))), Coefficients(a, b, c0, l), mode, lam, Lam)


def random_mode(rng, dim):
    modes = ["hjb-inf", "hjb-sup"] + (["pucci-minus", "pucci-plus"] if dim == 1 else [])
    return modes[int(rng.integers(len(modes)))]
