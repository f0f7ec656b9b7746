"""Vanishing-discount driver for the ergodic problem ``F(x, Dchi, D^2chi) = c``.

For a decreasing ladder of discounts the discounted solution ``u_d`` is
computed (warm-started from the previous rung) and

    c_k = -d_k u_{d_k}(x_ref),      chi = u_d - u_d(x_ref)   (last rung).
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ConfigError, Grid, ProblemSpec, ScalarField
from .scheme import BoundaryClosure, DiscreteOperator, discretize, origin_hamiltonian
from .solver import SolverError, solve_discounted

GROWTH_STEP_TOL = 0.10


class ErgodicError(SolverError):
    """A rung of the ladder failed; ``partial`` holds the result so far."""


@dataclass
class GrowthReport:
    radii: np.ndarray                       # outer edge of every annulus
    max_abs: np.ndarray                     # max |chi| per annulus
    ratios: dict                            # reference name -> per-annulus max |chi|/w
    verdicts: dict                          # "bounded", "subquadratic", "r^b"
    outer_inner_ratio: float                # max|chi| outer half / inner half

    def to_dict(self) -> dict:
        return {"radii": self.radii.tolist(), "max_abs": self.max_abs.tolist(),
                "ratios": {k: v.tolist() for k, v in self.ratios.items()},
                "verdicts": dict(self.verdicts),
                "outer_inner_ratio": self.outer_inner_ratio}


@dataclass
class ErgodicResult:
    deltas: np.ndarray
    c_estimates: np.ndarray
    residuals: np.ndarray
    chi: ScalarField
    x_ref: int
    convergence: np.ndarray
    growth: Optional[GrowthReport]
    c_aitken: Optional[float] = None
    closure_slack: float = 0.0
    flags: list = field(default_factory=list)
    u_last: Optional[ScalarField] = None
    bounds: list = field(default_factory=list)    # per rung: delta*max|u|, max|l|, slack

    @property
    def c(self) -> float:
        return float(self.c_estimates[-1])

    def to_json(self, chi_csv_path: Optional[str] = None) -> dict:
        return {"ladder": [[float(d), float(c), float(r)] for d, c, r in
                           zip(self.deltas, self.c_estimates, self.residuals)],
                "c": self.c, "c_aitken": self.c_aitken,
                "x_ref": self.chi.grid.coords[self.x_ref].tolist(),
                "closure_slack": self.closure_slack, "flags": list(self.flags),
                "chi_csv_path": chi_csv_path,
                "growth": None if self.growth is None else self.growth.to_dict()}


def write_field_csv(f: ScalarField, path, name: str = "value") -> None:
    cols = ["x", "y"][: f.grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols + [name])
        for x, v in zip(f.grid.coords, f.values):
            w.writerow([*map(repr, x.tolist()), repr(float(v))])


def aitken(seq: Sequence[float]) -> Optional[float]:
    """Aitken delta-squared extrapolation of the last three terms."""
    if len(seq) < 3:
        return None
    x0, x1, x2 = seq[-3:]
    den = x2 - 2 * x1 + x0
    if den == 0:
        return float(x2)
    return float(x2 - (x2 - x1) ** 2 / den)


def _resolve_ref(grid: Grid, x_ref) -> int:
    if x_ref is None:
        return grid.origin_index
    if isinstance(x_ref, (int, np.integer)):
        return int(x_ref)
    return grid.index_of(np.atleast_1d(np.asarray(x_ref, dtype=float)))


def vanishing_discount(problem, closure: Optional[BoundaryClosure] = None,
                       delta0: float = 0.2, ladder_factor: float = 0.5, ladder_len: int = 7,
                       tol: float = 1e-8, x_ref=None, inner: str = "direct",
                       beta_list: Sequence[float] = (1.0, 1.5),
                       osc_tol: float = 1e-9) -> ErgodicResult:
    """Run the discount ladder ``delta0 * ladder_factor**k``, ``k < ladder_len``.

    Without an explicit closure anchor the boundary data of rung ``k`` are
    anchored at ``delta_{k-1} u_{k-1}(0) / delta_k`` (first rung:
    ``-F(0, 0, 0) / delta``).  The anchor always uses the origin, so the
    discrete problem does not depend on ``x_ref``.  Non-monotone ``c_k`` is
    flagged in ``flags``, not raised.
    """
    if not delta0 > 0 or not 0 < ladder_factor < 1 or ladder_len < 1:
        raise ConfigError("need delta0 > 0, ladder_factor in (0, 1), ladder_len >= 1")
    op = problem if isinstance(problem, DiscreteOperator) else discretize(problem, closure)
    grid = op.grid
    ref = _resolve_ref(grid, x_ref)
    fixed_anchor = op.closure.anchor

    origin = grid.origin_index
    deltas, cs, res, bounds = [], [], [], []
    slack = 0.0
    u = None
    level = None            # delta * u_delta(0) of the previous rung
    for k in range(ladder_len):
        delta = delta0 * ladder_factor ** k
        if fixed_anchor is not None:
            anchor = fixed_anchor
        elif level is None:
            anchor = -origin_hamiltonian(op) / delta
        else:
            anchor = level / delta
        u0 = None if u is None else (u - u[origin]) + level / delta
        try:
            sol = solve_discounted(op, delta=delta, tol=tol, u0=u0, anchor=anchor, inner=inner)
        except SolverError as exc:
            partial = _assemble(grid, deltas, cs, res, u, ref, slack, beta_list, osc_tol)
            raise ErgodicError(f"ladder rung {k} (delta={delta:g}) failed: {exc}",
                               last_residual=exc.last_residual, partial=partial) from exc
        u = sol.u.values
        level = delta * u[origin]
        deltas.append(delta)
        cs.append(-delta * u[ref])
        res.append(sol.residual_inf)
        slack = max(slack, sol.closure_slack)
        bounds.append({"delta": delta, "lhs": sol.bound_lhs, "l_sup": sol.l_sup,
                       "slack": sol.closure_slack})
    out = _assemble(grid, deltas, cs, res, u, ref, slack, beta_list, osc_tol)
    out.bounds = bounds
    return out


def _assemble(grid, deltas, cs, res, u, ref, slack, beta_list, osc_tol) -> Optional[ErgodicResult]:
    if u is None:
        return None
    cs = np.array(cs)
    diffs = np.abs(np.diff(cs))
    flags = []
    if len(cs) >= 3:
        steps = np.diff(cs)
        if np.any(steps[1:] * steps[:-1] < -osc_tol ** 2):
            flags.append("oscillating")
        if np.any(diffs[1:] > diffs[:-1] + osc_tol):
            flags.append("non-contracting")
    chi = ScalarField(grid, u - u[ref])
    try:
        growth = growth_diagnostics(chi, beta_list)
    except ConfigError:
        growth = None
    return ErgodicResult(np.array(deltas), cs, np.array(res), chi, ref, diffs, growth,
                         aitken(list(cs)), slack, flags, ScalarField(grid, u))


def _nonincreasing(seq, rel=GROWTH_STEP_TOL) -> bool:
    seq = np.asarray(seq)
    return bool(np.all(seq[1:] <= (1 + rel) * seq[:-1] + 1e-12))


def growth_diagnostics(chi: ScalarField, beta_list: Sequence[float] = (1.0, 1.5),
                       n_annuli: int = 12, exclude_layers: int = 2) -> GrowthReport:
    """Growth of |chi| against r^2, r^beta and 1 over annuli inside the box.

    Annuli cover ``|x| <= L - exclude_layers * h``.  A polynomial reference
    "decays" when its ratios over the outer half of the annuli never rise by
    more than 10% from one annulus to the next and end strictly below where
    they started; "bounded" asks the same step rule of max|chi| and that the
    outer half does not exceed the inner half by more than 10%.
    """
    grid = chi.grid
    h = grid.spacing
    r_max = grid.halfwidth - exclude_layers * h
    n = min(int(n_annuli), int(np.floor(r_max / h + 1e-9)))
    if r_max <= 0 or n < 3:
        raise ConfigError("grid too small for three annuli")
    r = grid.radius
    edges = np.linspace(0.0, r_max, n + 1)
    which = np.searchsorted(edges, r - 1e-12 * h, side="left") - 1
    which[r == 0] = 0
    inside = (r <= r_max + 1e-12 * h) & (which >= 0)
    v = np.abs(chi.values)

    refs = {"r^2": 2.0}
    for beta in beta_list:
        refs[f"r^{beta:g}"] = float(beta)
    max_abs = np.zeros(n)
    ratios = {name: np.zeros(n) for name in refs}
    for j in range(n):
        m = inside & (which == j)
        if not m.any():
            raise ConfigError(f"annulus {j} contains no nodes")
        max_abs[j] = v[m].max()
        pos = m & (r > 0)
        for name, beta in refs.items():
            ratios[name][j] = (v[pos] / r[pos] ** beta).max() if pos.any() else np.nan

    half = n // 2
    outer = slice(half, n)
    verdicts = {}
    for name, rat in ratios.items():
        tail = rat[outer]
        verdicts[name] = bool(_nonincreasing(tail) and tail[-1] < tail[0] * (1 - 1e-6))
    inner_max = max_abs[:half].max()
    outer_max = max_abs[outer].max()
    ratio = float(outer_max / inner_max) if inner_max > 0 else (0.0 if outer_max == 0 else np.inf)
    verdicts["bounded"] = bool(_nonincreasing(max_abs[outer]) and ratio <= 1 + GROWTH_STEP_TOL)
    verdicts["subquadratic"] = verdicts["r^2"]
    ratios["1"] = max_abs.copy()
    return GrowthReport(edges[1:], max_abs, ratios, verdicts, ratio)


def uniqueness_probe(problem, closure: Optional[BoundaryClosure] = None, x_ref_a=None,
                     x_ref_b=None, threads: int = 1, **ladder) -> dict:
    """Run the ladder from two reference nodes and compare ``(c, chi)``.

    The deviation of ``chi_a - chi_b`` from its mean over interior nodes
    measures how far the two correctors are from differing by a constant.
    The default ladder goes one decade deeper than ``vanishing_discount``:
    the two ``c`` estimates differ by ``delta_min * (chi(x_a) - chi(x_b))``.
    """
    ladder.setdefault("ladder_len", 10)
    op = problem if isinstance(problem, DiscreteOperator) else discretize(problem, closure)
    grid = op.grid
    a = _resolve_ref(grid, x_ref_a)
    b = _resolve_ref(grid, x_ref_b)
    if a == b:
        raise ConfigError("uniqueness probe needs two distinct reference nodes")

    def run(ref):
        return vanishing_discount(op, x_ref=ref, **ladder)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            ra, rb = pool.map(run, (a, b))
    else:
        ra, rb = run(a), run(b)
    diff = (ra.chi.values - rb.chi.values)[grid.interior]
    return {"delta_c": abs(ra.c - rb.c),
            "max_dev_from_constant": float(np.max(np.abs(diff - diff.mean()))),
            "c_a": ra.c, "c_b": rb.c, "result_a": ra, "result_b": rb}
