"""Problem model shared by every other module.

A problem is a finite control sample, a uniform tensor grid on the box
``[-L, L]^N`` (``N`` in {1, 2}) and the coefficients ``a, b, c0, l``
tabulated on every (control, node) pair.  Tables are stored control-major:
``a[k, i]`` is the diffusion matrix for control ``k`` at node ``i``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

PSD_TOL = 1e-12
SIGMA_TOL = 1e-10


class ConfigError(ValueError):
    """Raised when a problem, grid or closure violates a precondition."""


class Mode(str, enum.Enum):
    HJB_INF = "hjb-inf"
    HJB_SUP = "hjb-sup"
    PUCCI_MINUS = "pucci-minus"
    PUCCI_PLUS = "pucci-plus"

    @property
    def is_pucci(self) -> bool:
        return self in (Mode.PUCCI_MINUS, Mode.PUCCI_PLUS)

    @property
    def concave(self) -> bool:
        """True for the inf-type operators (HJB-inf and Pucci-minus)."""
        return self in (Mode.HJB_INF, Mode.PUCCI_MINUS)


def as_mode(mode) -> Mode:
    try:
        return Mode(mode)
    except ValueError:
        raise ConfigError(f"unknown mode {mode!r}; expected one of "
                          f"{[m.value for m in Mode]}") from None


@dataclass(frozen=True)
class ControlSet:
    """Finite sample of the control space.

    ``points`` holds the labels handed to the coefficient closures; the
    control index is the position in that list.
    """

    points: tuple
    description: str = ""

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ConfigError("control set must be nonempty")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def indices(self) -> range:
        return range(len(self.points))

    @classmethod
    def single(cls, label: Any = 0, description: str = "singleton") -> "ControlSet":
        return cls((label,), description)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid on ``[-L, L]^dim`` with an odd node count per axis.

    Node ``i`` along an axis sits at ``spacing * (i - (n - 1) / 2)``, so the
    origin is an exact node and coordinates are symmetric bit-for-bit.
    Nodes are numbered lexicographically (last axis fastest).
    """

    dim: int
    halfwidth: float
    n_per_dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if not self.halfwidth > 0:
            raise ConfigError(f"halfwidth must be positive, got {self.halfwidth}")
        n = self.n_per_dim
        if int(n) != n or n < 3:
            raise ConfigError(f"n_per_dim must be an integer >= 3, got {n}")
        if n % 2 == 0:
            raise ConfigError(f"n_per_dim must be odd so the origin is a node, got {n}")

        mid = (n - 1) // 2
        axis = self.spacing * (np.arange(n) - mid)
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)

        idx = np.indices((n,) * self.dim).reshape(self.dim, -1).T
        coords = axis[idx]
        coords.flags.writeable = False
        object.__setattr__(self, "multi_index", idx)
        object.__setattr__(self, "coords", coords)
        bnd = np.any((idx == 0) | (idx == n - 1), axis=1)
        bnd.flags.writeable = False
        object.__setattr__(self, "boundary", bnd)
        object.__setattr__(self, "interior", ~bnd)

    @property
    def spacing(self) -> float:
        return 2.0 * self.halfwidth / (self.n_per_dim - 1)

    @property
    def shape(self) -> tuple:
        return (self.n_per_dim,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.n_per_dim ** self.dim

    @property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coords ** 2, axis=1))

    @property
    def origin_index(self) -> int:
        return self.index_of(np.zeros(self.dim))

    def coord(self, index: int) -> np.ndarray:
        return self.coords[index].copy()

    def index_of(self, point) -> int:
        """Index of the node at ``point``; raises if ``point`` is not a node."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            raise ConfigError(f"point must have {self.dim} coordinates")
        mid = (self.n_per_dim - 1) // 2
        ij = np.rint(point / self.spacing).astype(int) + mid
        if np.any(ij < 0) or np.any(ij >= self.n_per_dim):
            raise ConfigError(f"point {point} lies outside the box")
        index = int(np.ravel_multi_index(tuple(ij), self.shape))
        if not np.allclose(self.coords[index], point, atol=1e-9 * self.spacing):
            raise ConfigError(f"point {point} is not a grid node")
        return index

    def nearest_index(self, point) -> int:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return int(np.argmin(np.sum((self.coords - point) ** 2, axis=1)))

    def neighbor(self, axis: int, step: int) -> np.ndarray:
        """Index of the neighbour ``step`` (+1 / -1) along ``axis``, clamped at the box."""
        ij = self.multi_index.copy()
        ij[:, axis] = np.clip(ij[:, axis] + step, 0, self.n_per_dim - 1)
        return np.ravel_multi_index(tuple(ij.T), self.shape)

    def same_as(self, other: "Grid") -> bool:
        return (self.dim, self.halfwidth, self.n_per_dim) == (
            other.dim, other.halfwidth, other.n_per_dim)


def build_grid(dim: int, halfwidth: float, n_per_dim: int) -> Grid:
    return Grid(int(dim), float(halfwidth), int(n_per_dim))


@dataclass(eq=False)
class ScalarField:
    """One finite value per grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ConfigError(f"field has {self.values.shape} values, grid has "
                              f"{self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("field values must be finite")

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "ScalarField":
        vals = np.broadcast_to(np.asarray(fn(grid.coords), dtype=float), (grid.n_nodes,))
        return cls(grid, np.array(vals))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    def at(self, point) -> float:
        return float(self.values[self.grid.index_of(point)])

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class CoefficientFns:
    """Coefficient closures ``f(x, alpha)``.

    ``x`` is an ``(m, N)`` array of points and ``alpha`` one control label.
    Return shapes are broadcast: for ``a`` a scalar or ``(m,)`` result means a
    multiple of the identity, ``(N, N)`` or ``(m, N, N)`` a full matrix; ``b``
    may return ``(N,)`` or ``(m, N)`` (in 1D also ``(m,)``).  ``sigma``, when
    given, returns ``(m, N, k)`` (or ``(N, k)``) with ``a = sigma sigma^T``.
    """

    a: Callable
    b: Callable
    c0: Callable = lambda x, alpha: 0.0
    l: Callable = lambda x, alpha: 0.0
    sigma: Optional[Callable] = None

    def eval_a(self, x, alpha) -> np.ndarray:
        return _as_matrix(self.a(x, alpha), x)

    def eval_b(self, x, alpha) -> np.ndarray:
        m, n = x.shape
        b = np.asarray(self.b(x, alpha), dtype=float)
        if n == 1 and b.ndim == 1 and b.shape[0] == m:
            b = b[:, None]
        return np.array(np.broadcast_to(b, (m, n)))

    def eval_scalar(self, name: str, x, alpha) -> np.ndarray:
        fn = getattr(self, name)
        return np.array(np.broadcast_to(np.asarray(fn(x, alpha), dtype=float), (x.shape[0],)))

    def eval_sigma(self, x, alpha) -> Optional[np.ndarray]:
        if self.sigma is None:
            return None
        s = np.asarray(self.sigma(x, alpha), dtype=float)
        m, n = x.shape
        if s.ndim == 0:
            s = s * np.eye(n)
        elif s.ndim == 1 and n == 1:
            s = s.reshape(m, 1, 1)
        if s.ndim == 2:
            s = np.broadcast_to(s, (m,) + s.shape)
        return np.array(s)


def _as_matrix(val, x) -> np.ndarray:
    m, n = x.shape
    val = np.asarray(val, dtype=float)
    eye = np.eye(n)
    if val.ndim == 0:
        out = val * np.broadcast_to(eye, (m, n, n))
    elif val.ndim == 1 and val.shape[0] == m:
        out = val[:, None, None] * eye
    elif val.shape == (n, n):
        out = np.broadcast_to(val, (m, n, n))
    elif val.shape == (m, n, n):
        out = val
    else:
        raise ConfigError(f"diffusion closure returned shape {val.shape}")
    return np.array(out, dtype=float)


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Tabulated coefficients, control-major.

    Shapes: ``a (K, n, N, N)``, ``b (K, n, N)``, ``c0 (K, n)``, ``l (K, n)``,
    ``sigma (K, n, N, m)`` or None.
    """

    a: np.ndarray
    b: np.ndarray
    c0: np.ndarray
    l: np.ndarray
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        K, n = a.shape[:2]
        N = a.shape[2]
        if a.shape != (K, n, N, N) or b.shape != (K, n, N):
            raise ConfigError("inconsistent coefficient shapes")
        c0 = np.asarray(self.c0, dtype=float).reshape(K, n)
        l = np.asarray(self.l, dtype=float).reshape(K, n)
        for name, arr in (("a", a), ("b", b), ("c0", c0), ("l", l)):
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"coefficient {name} has non-finite entries")
        _check_psd(a)
        neg = np.argwhere(c0 < 0)
        if neg.size:
            k, i = neg[0]
            raise ConfigError(f"c0 must be nonnegative; c0={c0[k, i]} at node {i}, alpha index {k}")
        sigma = self.sigma
        if sigma is not None:
            sigma = np.asarray(sigma, dtype=float)
            ssT = np.einsum("knij,knlj->knil", sigma, sigma)
            if np.max(np.abs(ssT - a), initial=0.0) > SIGMA_TOL:
                raise ConfigError("sigma sigma^T does not reproduce a")
        for name, arr in (("a", a), ("b", b), ("c0", c0), ("l", l), ("sigma", sigma)):
            if arr is not None:
                arr = np.array(arr)
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def n_controls(self) -> int:
        return self.a.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.a.shape[1]

    @property
    def dim(self) -> int:
        return self.a.shape[2]

    @property
    def l_sup(self) -> float:
        return float(np.max(np.abs(self.l)))

    def shifted(self, dl: float) -> "Coefficients":
        return Coefficients(self.a, self.b, self.c0, self.l + dl, self.sigma)

    def negated_cost(self) -> "Coefficients":
        return Coefficients(self.a, self.b, self.c0, -self.l, self.sigma)

    def at_node(self, node: int) -> dict:
        return {"a": self.a[:, node], "b": self.b[:, node],
                "c0": self.c0[:, node], "l": self.l[:, node]}


def _check_psd(a: np.ndarray) -> None:
    sym_err = np.abs(a - np.swapaxes(a, -1, -2))
    if np.max(sym_err, initial=0.0) > PSD_TOL * max(1.0, np.max(np.abs(a), initial=0.0)):
        k, i = np.unravel_index(np.argmax(sym_err.reshape(a.shape[:2] + (-1,)).max(-1)), a.shape[:2])
        raise ConfigError(f"diffusion matrix not symmetric at node {i}, alpha index {k}")
    eig_min = np.linalg.eigvalsh(a).min(axis=-1)
    scale = np.maximum(1.0, np.abs(a).max(axis=(-1, -2)))
    bad = np.argwhere(eig_min < -PSD_TOL * scale)
    if bad.size:
        k, i = bad[0]
        raise ConfigError(f"diffusion matrix not positive semidefinite at node {i}, "
                          f"alpha index {k} (min eigenvalue {eig_min[k, i]:.3g})")


def sample_coefficients(fns: CoefficientFns, grid: Grid, controls: ControlSet) -> Coefficients:
    """Tabulate the closures on every (control, node) pair."""
    x = grid.coords
    a, b, c0, l, sig = [], [], [], [], []
    for alpha in controls.points:
        a.append(fns.eval_a(x, alpha))
        b.append(fns.eval_b(x, alpha))
        c0.append(fns.eval_scalar("c0", x, alpha))
        l.append(fns.eval_scalar("l", x, alpha))
        sig.append(fns.eval_sigma(x, alpha))
    sigma = None if fns.sigma is None else np.stack(sig)
    return Coefficients(np.stack(a), np.stack(b), np.stack(c0), np.stack(l), sigma)


@dataclass(eq=False)
class ProblemSpec:
    grid: Grid
    controls: ControlSet
    coefficients: Coefficients
    mode: Mode = Mode.HJB_INF
    pucci_lambda: float = 1.0
    pucci_Lambda: float = 1.0

    def __post_init__(self):
        self.mode = as_mode(self.mode)
        if not 0 < self.pucci_lambda <= self.pucci_Lambda:
            raise ConfigError(f"need 0 < lambda <= Lambda, got {self.pucci_lambda}, "
                              f"{self.pucci_Lambda}")
        if self.mode.is_pucci and self.grid.dim != 1:
            raise ConfigError("Pucci modes are only supported in dimension 1")
        co = self.coefficients
        if co.n_nodes != self.grid.n_nodes or co.dim != self.grid.dim:
            raise ConfigError("coefficients are not tabulated on this grid")
        if co.n_controls != len(self.controls):
            raise ConfigError("coefficients do not match the control set")

    @property
    def l_min(self) -> float:
        return float(self.coefficients.l.min())

    @property
    def l_max(self) -> float:
        return float(self.coefficients.l.max())

    def with_coefficients(self, coefficients: Coefficients, mode=None) -> "ProblemSpec":
        return ProblemSpec(self.grid, self.controls, coefficients,
                           self.mode if mode is None else mode,
                           self.pucci_lambda, self.pucci_Lambda)


def make_problem(fns: CoefficientFns, grid: Grid, controls: Optional[ControlSet] = None,
                 mode="hjb-inf", pucci_lambda: float = 1.0,
                 pucci_Lambda: float = 1.0) -> ProblemSpec:
    controls = controls or ControlSet.single()
    return ProblemSpec(grid, controls, sample_coefficients(fns, grid, controls),
                       as_mode(mode), pucci_lambda, pucci_Lambda)


# CSV exchange -------------------------------------------------------------

def _csv_columns(dim: int) -> list:
    if dim == 1:
        return ["node_index", "alpha_index", "a_11", "b_1", "c0", "l"]
    return ["node_index", "alpha_index", "a_11", "a_12", "a_22", "b_1", "b_2", "c0", "l"]


def save_coefficients_csv(coefficients: Coefficients, path) -> None:
    dim = coefficients.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_csv_columns(dim))
        for k in range(coefficients.n_controls):
            for i in range(coefficients.n_nodes):
                a = coefficients.a[k, i]
                amat = [a[0, 0]] if dim == 1 else [a[0, 0], a[0, 1], a[1, 1]]
                vals = [*amat, *coefficients.b[k, i], coefficients.c0[k, i], coefficients.l[k, i]]
                w.writerow([i, k, *(repr(float(v)) for v in vals)])


def load_coefficients_csv(path, grid: Grid, n_controls: Optional[int] = None) -> Coefficients:
    """Read a coefficient table; every (node, alpha) pair must appear exactly once."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    dim = grid.dim
    missing = set(_csv_columns(dim)) - set(rows[0].keys() if rows else ())
    if missing:
        raise ConfigError(f"coefficient CSV lacks columns {sorted(missing)}")
    K = n_controls or 1 + max(int(r["alpha_index"]) for r in rows)
    n = grid.n_nodes
    a = np.full((K, n, dim, dim), np.nan)
    b = np.full((K, n, dim), np.nan)
    c0 = np.full((K, n), np.nan)
    l = np.full((K, n), np.nan)
    for r in rows:
        i, k = int(r["node_index"]), int(r["alpha_index"])
        if dim == 1:
            a[k, i, 0, 0] = float(r["a_11"])
            b[k, i, 0] = float(r["b_1"])
        else:
            a12 = float(r["a_12"])
            a[k, i] = [[float(r["a_11"]), a12], [a12, float(r["a_22"])]]
            b[k, i] = [float(r["b_1"]), float(r["b_2"])]
        c0[k, i] = float(r["c0"])
        l[k, i] = float(r["l"])
    if np.isnan(c0).any():
        raise ConfigError("coefficient CSV does not cover every (node, alpha) pair")
    return Coefficients(a, b, c0, l)


def control_grid(lo: float, hi: float, n: int, description: str = "") -> ControlSet:
    """Uniform sample of an interval of controls (sampling density is the caller's call)."""
    return ControlSet(tuple(float(v) for v in np.linspace(lo, hi, n)),
                      description or f"{n} points in [{lo}, {hi}]")

