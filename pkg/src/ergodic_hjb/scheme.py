"""Monotone upwind finite differences for the HJB / Pucci operator on the grid.

For every interior node and (expanded) control the operator is written as

    stencil . u - l = diag * u_i + sum_j off_j * u_{nbr_j} - l
                    = sum_j off_j (u_{nbr_j} - u_i) + c0 u_i - l

with ``off_j <= 0 <= diag + sum_j off_j = c0`` (the M-matrix sign pattern).
The second form is what gets evaluated, so constants are reproduced exactly.
Second derivatives use central differences weighted by the diagonal of
``a``; the drift uses one-sided differences on the side ``b`` points to.
Boundary nodes carry Dirichlet data from a :class:`BoundaryClosure`.

In the Pucci modes (1D only) the control set is expanded to pairs
``(alpha, d)`` with ``d`` in ``{lambda, Lambda}``, since in one dimension
``M-(X) = min(-lambda X, -Lambda X)`` and ``M+(X) = max(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import ConfigError, Grid, Mode, ProblemSpec, ScalarField

BARRIER = "quadratic-barrier-dirichlet"
FROZEN = "frozen-value"


@dataclass(frozen=True)
class BoundaryClosure:
    """Dirichlet data on the faces of the box.

    ``quadratic-barrier-dirichlet``: ``anchor + s * h_bar * |x|^2 / 2`` with
    ``s = +1`` for inf-type operators and ``s = -1`` for sup-type ones.
    ``frozen-value``: the constant ``anchor``.

    ``anchor=None`` means automatic: for a discounted solve it is the constant
    solution ``-F(0, 0, 0) / delta`` of the equation frozen at the origin; for
    time marching the boundary keeps the initial datum.  In discounted solves
    the data are clipped to the a priori envelope ``[min l, max l] / delta``.
    """

    kind: str = BARRIER
    h_bar: float = 0.05
    anchor: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (BARRIER, FROZEN):
            raise ConfigError(f"unknown closure kind {self.kind!r}")
        if self.kind == BARRIER and not self.h_bar > 0:
            raise ConfigError("barrier closure needs h_bar > 0")

    def with_anchor(self, anchor: Optional[float]) -> "BoundaryClosure":
        return replace(self, anchor=anchor)


@dataclass(eq=False)
class DiscreteOperator:
    """Per-(control, node) affine stencils; see the module docstring.

    ``diag (K, n)``, ``off (K, n, 2 dim)``, ``cost (K, n)``; neighbour ``j``
    of node ``i`` is ``nbr[i, j]`` with ``j = 2 * axis + (0 for -, 1 for +)``.
    Boundary rows are zero.  ``control_of[k]`` maps an expanded control back
    to the problem's control index, ``diffusion_of[k]`` gives the Pucci
    diffusion value (NaN in HJB modes).  ``zeroth (K, n)`` is ``c0`` on
    interior rows.
    """

    problem: ProblemSpec
    closure: BoundaryClosure
    diag: np.ndarray
    off: np.ndarray
    cost: np.ndarray
    nbr: np.ndarray
    control_of: np.ndarray
    diffusion_of: np.ndarray
    zeroth: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.problem.grid

    @property
    def mode(self) -> Mode:
        return self.problem.mode

    @property
    def n_controls(self) -> int:
        return self.diag.shape[0]

    def stencil_values(self, u: np.ndarray) -> np.ndarray:
        """``stencil_k . u - l_k`` for every control, shape ``(K, n)``."""
        jumps = u[self.nbr] - u[:, None]
        return np.einsum("knj,nj->kn", self.off, jumps) + self.zeroth * u - self.cost

    def optimize(self, values: np.ndarray):
        """Pointwise optimum over controls and the lowest attaining index."""
        k = np.argmin(values, axis=0) if self.mode.concave else np.argmax(values, axis=0)
        return np.take_along_axis(values, k[None], axis=0)[0], k

    def boundary_values(self, delta: float = 0.0, anchor: Optional[float] = None) -> np.ndarray:
        """Dirichlet data on boundary nodes (zero on interior nodes)."""
        return closure_values(self, delta, anchor)

    def max_diagonal(self) -> float:
        return float(self.diag[:, self.grid.interior].max(initial=0.0))

    def to_triplets(self) -> list:
        """(alpha, row, col, weight) for every nonzero stencil entry, interior rows only."""
        out = []
        interior = np.flatnonzero(self.grid.interior)
        for k in range(self.n_controls):
            for i in interior:
                out.append((k, int(i), int(i), float(self.diag[k, i])))
                for j in range(self.nbr.shape[1]):
                    w = float(self.off[k, i, j])
                    if w != 0.0:
                        out.append((k, int(i), int(self.nbr[i, j]), w))
        return out

    def dump_triplets(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# alpha row col weight\n")
            for k, i, j, w in self.to_triplets():
                fh.write(f"{k} {i} {j} {w!r}\n")

    def frozen_matrix(self, policy: np.ndarray, delta: float):
        """Sparse ``delta I + A_policy`` with identity rows on the boundary."""
        grid = self.grid
        n = grid.n_nodes
        interior = grid.interior
        rows = np.arange(n)
        diag = np.where(interior, delta + self.diag[policy, rows], 1.0)
        offw = self.off[policy, rows] * interior[:, None]
        r = np.concatenate([rows, np.repeat(rows, self.nbr.shape[1])])
        c = np.concatenate([rows, self.nbr.ravel()])
        w = np.concatenate([diag, offw.ravel()])
        keep = w != 0.0
        return sp.csr_matrix((w[keep], (r[keep], c[keep])), shape=(n, n))

    def frozen_rhs(self, policy: np.ndarray, g: np.ndarray) -> np.ndarray:
        rows = np.arange(self.grid.n_nodes)
        return np.where(self.grid.interior, self.cost[policy, rows], g)


def discretize(problem: ProblemSpec, closure: Optional[BoundaryClosure] = None) -> DiscreteOperator:
    closure = closure or BoundaryClosure()
    grid = problem.grid
    co = problem.coefficients
    dim, h, n = grid.dim, grid.spacing, grid.n_nodes
    mode = problem.mode
    a = co.a
    if dim == 2:
        offdiag = np.abs(a[..., 0, 1]) + np.abs(a[..., 1, 0])
        if np.any(offdiag > 1e-14 * np.maximum(1.0, np.abs(a).max(axis=(-1, -2)))):
            raise ConfigError("dimension 2 requires diagonal diffusion matrices "
                              "(mixed derivatives are not discretized)")

    K = co.n_controls
    if mode.is_pucci:
        if dim != 1:
            raise ConfigError("Pucci modes are only supported in dimension 1")
        diffs = np.array([problem.pucci_lambda, problem.pucci_Lambda])
        control_of = np.repeat(np.arange(K), 2)
        diffusion_of = np.tile(diffs, K)
        diffusion = np.broadcast_to(diffusion_of[:, None, None], (2 * K, n, 1)).copy()
    else:
        control_of = np.arange(K)
        diffusion_of = np.full(K, np.nan)
        diffusion = np.diagonal(a, axis1=-2, axis2=-1).copy()     # (K, n, dim)

    b = co.b[control_of]
    KK = len(control_of)
    diag = np.zeros((KK, n))
    off = np.zeros((KK, n, 2 * dim))
    for d in range(dim):
        ad = diffusion[..., d] / h ** 2
        bd = b[..., d] / h
        fwd = np.maximum(bd, 0.0)
        bwd = np.maximum(-bd, 0.0)
        diag += 2 * ad + fwd + bwd
        off[..., 2 * d] = -ad - bwd
        off[..., 2 * d + 1] = -ad - fwd
    interior = grid.interior
    zeroth = co.c0[control_of] * interior
    diag += zeroth
    diag *= interior
    off *= interior[:, None]
    cost = co.l[control_of] * interior

    nbr = np.empty((n, 2 * dim), dtype=np.intp)
    for d in range(dim):
        nbr[:, 2 * d] = grid.neighbor(d, -1)
        nbr[:, 2 * d + 1] = grid.neighbor(d, +1)

    return DiscreteOperator(problem, closure, diag, off, cost, nbr, control_of, diffusion_of,
                            zeroth)


def origin_hamiltonian(op: DiscreteOperator, node: Optional[int] = None) -> float:
    """``F(x, 0, 0)`` at ``node`` (default origin): the optimum of ``-l``."""
    node = op.grid.origin_index if node is None else node
    co = op.problem.coefficients
    vals = -co.l[:, node]
    return float(vals.min() if op.mode.concave else vals.max())


def envelope(op: DiscreteOperator, delta: float):
    """A priori bounds on the discounted solution from constant sub/supersolutions."""
    lo, hi = op.problem.l_min, op.problem.l_max
    if np.any(op.problem.coefficients.c0 > 0):
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    return lo / delta, hi / delta


def closure_values(op: DiscreteOperator, delta: float = 0.0,
                   anchor: Optional[float] = None) -> np.ndarray:
    closure = op.closure
    grid = op.grid
    if anchor is None:
        anchor = closure.anchor
    if anchor is None:
        anchor = -origin_hamiltonian(op) / delta if delta > 0 else 0.0
    g = np.full(grid.n_nodes, float(anchor))
    if closure.kind == BARRIER:
        sign = 1.0 if op.mode.concave else -1.0
        g = g + sign * closure.h_bar * 0.5 * grid.radius ** 2
    if delta > 0:
        lo, hi = envelope(op, delta)
        g = np.clip(g, lo, hi)
    return np.where(grid.boundary, g, 0.0)


def residual_values(op: DiscreteOperator, u: np.ndarray, delta: float,
                    g: np.ndarray) -> np.ndarray:
    val, _ = op.optimize(op.stencil_values(u))
    return np.where(op.grid.interior, delta * u + val, u - g)


def apply(op: DiscreteOperator, u: ScalarField, delta: float = 0.0,
          boundary: Optional[np.ndarray] = None) -> ScalarField:
    """Residual of ``delta u + F_h[u] = 0`` plus the boundary closure.

    Interior: ``delta u_i + opt_k(stencil_k . u - l_k)``; boundary:
    ``u_i - g_i``.  ``boundary`` overrides the closure data.
    """
    if not u.grid.same_as(op.grid):
        raise ConfigError("field lives on a different grid")
    if delta < 0:
        raise ConfigError("delta must be nonnegative")
    g = closure_values(op, delta) if boundary is None else np.asarray(boundary, dtype=float)
    return ScalarField(op.grid, residual_values(op, u.values, delta, g))
