"""Discounted stationary solves and explicit parabolic marching.

``solve_discounted`` runs Howard policy iteration on ``delta u + F_h[u] = 0``:
freeze the optimal control at every node, solve the resulting linear
M-matrix system, repeat.  If a policy cycle shows up it falls back to damped
value iteration, which is a contraction with factor ``1 - theta delta dt``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import ConfigError, ProblemSpec, ScalarField
from .scheme import (FROZEN, BoundaryClosure, DiscreteOperator, closure_values, discretize,
                     origin_hamiltonian, residual_values)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Numerical failure; carries the last residual and any partial state."""

    def __init__(self, msg, last_residual=float("nan"), partial=None):
        super().__init__(msg)
        self.last_residual = last_residual
        self.partial = partial


@dataclass(eq=False)
class DiscountedSolve:
    delta: float
    u: ScalarField
    residual_inf: float
    iterations: int
    policy: np.ndarray                  # node -> problem control index
    boundary: np.ndarray                # Dirichlet data used (zero on interior)
    closure_slack: float
    l_sup: float
    inner_iterations: int = 0
    fallback: bool = False
    increments: list = field(default_factory=list)

    @property
    def bound_lhs(self) -> float:
        """delta * max|u|, the left side of the discrete (b1) bound."""
        return self.delta * float(np.max(np.abs(self.u.values)))

    def summary(self) -> dict:
        grid = self.u.grid
        return {"delta": self.delta, "residual": self.residual_inf,
                "iterations": self.iterations,
                "u0": float(self.u.values[grid.origin_index]),
                "sup_u": float(self.u.values.max()), "inf_u": float(self.u.values.min()),
                "closure_slack": self.closure_slack, "fallback": self.fallback}


def gauss_seidel(A, b: np.ndarray, x0: Optional[np.ndarray] = None, tol: float = 1e-12,
                 max_sweeps: int = 100_000):
    """Point Gauss-Seidel with lexicographic sweeps on a CSR matrix.

    Returns ``(x, sweeps)``; stops when the sup-norm update falls below ``tol``.
    Plain Python loops: intended for small systems and cross-checks.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    indptr, indices, data = A.indptr, A.indices, A.data
    diag = A.diagonal()
    if np.any(diag == 0):
        raise ConfigError("Gauss-Seidel needs a nonzero diagonal")
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i in range(n):
            s = b[i]
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                if j != i:
                    s -= data[jj] * x[j]
            xi = s / diag[i]
            change = max(change, abs(xi - x[i]))
            x[i] = xi
        if not np.isfinite(change):
            raise SolverError("Gauss-Seidel diverged")
        if change <= tol:
            return x, sweep
    raise SolverError(f"Gauss-Seidel did not reach {tol:g} in {max_sweeps} sweeps",
                      last_residual=change)


def _linear_solve(A, rhs, inner, u0, inner_tol):
    if inner == "direct":
        return spla.spsolve(sp.csc_matrix(A), rhs), 1
    if inner == "gauss-seidel":
        return gauss_seidel(A, rhs, u0, tol=inner_tol)
    raise ConfigError(f"unknown inner solver {inner!r}")


def value_iteration(op: DiscreteOperator, delta: float, g: np.ndarray, u0: np.ndarray,
                    theta: float = 1.0, tol: float = 1e-10, max_iter: int = 200_000):
    """Damped fixed-point iteration ``u <- u - theta dt R(u)``, ``dt = 1/(max diag + delta)``.

    Returns ``(u, increments)`` with the sup-norm of every update, so the
    contraction factor can be measured rather than assumed.
    """
    if not 0 < theta <= 1:
        raise ConfigError("damping theta must lie in (0, 1]")
    dt = 1.0 / (op.max_diagonal() + delta)
    interior = op.grid.interior
    u = np.where(interior, u0, g)
    increments = []
    for _ in range(max_iter):
        R = residual_values(op, u, delta, g)
        step = theta * dt * R * interior
        u = u - step
        inc = float(np.max(np.abs(step)))
        increments.append(inc)
        if inc <= tol:
            return u, increments
    raise SolverError("value iteration did not converge", last_residual=increments[-1],
                      partial=u)


def solve_discounted(problem: Union[ProblemSpec, DiscreteOperator],
                     closure: Optional[BoundaryClosure] = None, delta: float = 0.1,
                     tol: float = 1e-8, max_iter: int = 200, u0=None,
                     anchor: Optional[float] = None, inner: str = "direct",
                     inner_tol: float = 1e-13, theta: float = 1.0) -> DiscountedSolve:
    """Solve ``delta u + F_h[u] = 0`` with the closure's Dirichlet data.

    Convergence is declared when the sup-norm residual is below ``tol`` or
    the policy reproduces itself (the frozen system is then solved exactly).
    """
    if not delta > 0:
        raise ConfigError("delta must be positive")
    op = problem if isinstance(problem, DiscreteOperator) else discretize(problem, closure)
    grid = op.grid
    g = closure_values(op, delta, anchor)
    rows = np.arange(grid.n_nodes)
    if u0 is None:
        a0 = -origin_hamiltonian(op) / delta
        u = np.where(grid.interior, a0, g)
    else:
        u = np.where(grid.interior, np.asarray(getattr(u0, "values", u0), dtype=float), g)

    seen = {}
    prev_policy = None
    inner_total = 0
    res = np.inf
    fallback = False
    increments = []
    it = 0
    for it in range(max_iter + 1):
        vals = op.stencil_values(u)
        best, policy = op.optimize(vals)
        R = np.where(grid.interior, delta * u + best, u - g)
        res = float(np.max(np.abs(R)))
        if res <= tol or (prev_policy is not None and np.array_equal(policy, prev_policy)):
            break
        if it == max_iter:
            raise SolverError(f"policy iteration did not converge in {max_iter} iterations "
                              f"(residual {res:.3e})", last_residual=res, partial=u)
        key = policy.tobytes()
        if key in seen:
            log.warning("policy cycle at iteration %d; switching to value iteration", it)
            u, increments = value_iteration(op, delta, g, u, theta=theta, tol=tol * 1e-2)
            fallback = True
            best, policy = op.optimize(op.stencil_values(u))
            R = np.where(grid.interior, delta * u + best, u - g)
            res = float(np.max(np.abs(R)))
            break
        seen[key] = it
        prev_policy = policy
        # A u - rhs is exactly R for the frozen policy; solving for the
        # correction keeps large constant offsets out of the linear solve
        A = op.frozen_matrix(policy, delta)
        du, n_inner = _linear_solve(A, R, inner, np.zeros_like(u), inner_tol)
        inner_total += n_inner
        if not np.all(np.isfinite(du)):
            raise SolverError("frozen-policy solve produced non-finite values",
                              last_residual=res, partial=u)
        u = u - du

    l_sup = float(np.max(np.abs(op.problem.coefficients.l)))
    slack = max(0.0, delta * float(np.max(np.abs(g[grid.boundary]))) - l_sup)
    out = DiscountedSolve(delta, ScalarField(grid, u), res, it, op.control_of[policy], g,
                          slack, l_sup, inner_total, fallback, increments)
    if out.bound_lhs > l_sup + 1e-8 * max(1.0, l_sup) + slack:
        raise SolverError(f"discrete discounted bound violated: delta*max|u| = "
                          f"{out.bound_lhs:.6g} > {l_sup + slack:.6g}", partial=u)
    return out


# --- parabolic marching ------------------------------------------------------

@dataclass(eq=False)
class ParabolicRun:
    h0: ScalarField
    dt: float
    T_final: float
    tail_window: float
    times: np.ndarray
    snapshots: np.ndarray              # (n_snap, n_nodes)
    u_final: ScalarField
    tail_sup: np.ndarray               # per node, over the tail window
    tail_inf: np.ndarray
    probes: np.ndarray                 # node indices
    steps: int

    @property
    def probe_sup(self) -> np.ndarray:
        return self.tail_sup[self.probes]

    @property
    def probe_inf(self) -> np.ndarray:
        return self.tail_inf[self.probes]

    @property
    def ubar(self) -> float:
        return float(self.probe_sup.max())

    @property
    def ulow(self) -> float:
        return float(self.probe_inf.min())

    @property
    def spread_ubar(self) -> float:
        return float(np.ptp(self.probe_sup))

    @property
    def spread_ulow(self) -> float:
        return float(np.ptp(self.probe_inf))

    def tail_stats(self) -> dict:
        grid = self.h0.grid
        return {"ubar": self.ubar, "ulow": self.ulow, "spread_ubar": self.spread_ubar,
                "spread_ulow": self.spread_ulow, "T_final": self.T_final, "dt": self.dt,
                "tail_window": self.tail_window, "steps": self.steps,
                "probes": [{"x": grid.coords[p].tolist(), "sup": float(self.tail_sup[p]),
                            "inf": float(self.tail_inf[p])} for p in self.probes]}


def default_probes(grid) -> np.ndarray:
    """Origin plus the points at +-L/2 on every axis (nearest nodes)."""
    pts = [np.zeros(grid.dim)]
    for d in range(grid.dim):
        for s in (-1, 1):
            p = np.zeros(grid.dim)
            p[d] = s * grid.halfwidth / 2
            pts.append(p)
    return np.array(sorted({grid.nearest_index(p) for p in pts}))


def cfl_limit(op: DiscreteOperator) -> float:
    """Largest dt keeping the explicit update monotone."""
    m = op.max_diagonal()
    return np.inf if m == 0 else 1.0 / m


def march_parabolic(problem: Union[ProblemSpec, DiscreteOperator],
                    closure: Optional[BoundaryClosure] = None, h0: ScalarField = None,
                    dt: Optional[float] = None, T_final: float = 10.0,
                    tail_window: Optional[float] = None, probes: Optional[Sequence[int]] = None,
                    n_snapshots: int = 50) -> ParabolicRun:
    """Explicit Euler for ``u_t + F_h[u] = 0`` with ``u(0) = h0``.

    ``dt`` defaults to 0.9 of the monotonicity (CFL) limit; a larger
    ``dt`` is rejected.  Tail statistics are the per-node max/min of ``u``
    over ``[T_final - tail_window, T_final]`` (default window ``T_final/4``).
    """
    closure = closure or BoundaryClosure(kind=FROZEN)
    op = problem if isinstance(problem, DiscreteOperator) else discretize(problem, closure)
    grid = op.grid
    if h0 is None or not h0.grid.same_as(grid):
        raise ConfigError("initial datum must be a field on the problem grid")
    limit = cfl_limit(op)
    if dt is None:
        dt = 0.9 * limit
    if dt <= 0 or dt > limit * (1 + 1e-12):
        raise ConfigError(f"dt={dt:g} violates the monotonicity limit {limit:g}")
    if T_final <= 0:
        raise ConfigError("T_final must be positive")
    tail_window = T_final / 4 if tail_window is None else float(tail_window)
    if not 0 < tail_window <= T_final:
        raise ConfigError("tail_window must lie in (0, T_final]")

    if op.closure.kind == FROZEN and op.closure.anchor is None:
        g = np.where(grid.boundary, h0.values, 0.0)
    else:
        g = closure_values(op, 0.0)
    interior = grid.interior
    u = np.where(interior, h0.values, g)

    n_steps = int(np.ceil(T_final / dt - 1e-9))
    dt = T_final / n_steps
    tail_start = n_steps - int(np.floor(tail_window / dt + 1e-9))
    snap_every = max(1, n_steps // max(1, n_snapshots))
    times, snaps = [0.0], [u.copy()]
    tail_sup = np.full(grid.n_nodes, -np.inf)
    tail_inf = np.full(grid.n_nodes, np.inf)
    if tail_start == 0:
        tail_sup, tail_inf = u.copy(), u.copy()

    for step in range(1, n_steps + 1):
        best, _ = op.optimize(op.stencil_values(u))
        u = np.where(interior, u - dt * best, g)
        if step % snap_every == 0 or step == n_steps:
            if not np.all(np.isfinite(u)):
                raise SolverError(f"non-finite values at t={step * dt:g}",
                                  partial=(times[-1], snaps[-1]))
            times.append(step * dt)
            snaps.append(u.copy())
        if step >= tail_start:
            np.maximum(tail_sup, u, out=tail_sup)
            np.minimum(tail_inf, u, out=tail_inf)

    probes = default_probes(grid) if probes is None else np.asarray(probes, dtype=int)
    return ParabolicRun(h0, dt, T_final, tail_window, np.array(times), np.array(snaps),
                        ScalarField(grid, u), tail_sup, tail_inf, probes, n_steps)
