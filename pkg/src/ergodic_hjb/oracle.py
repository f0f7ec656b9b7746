"""Brute-force references, independent of the grid solver.

None of these functions touch the finite-difference machinery: they sample
admissible matrices, simulate paths, integrate against a Gaussian density or
eliminate a dense system directly.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .core import CoefficientFns, ConfigError
from .operators import PucciParams


@dataclass(frozen=True)
class OracleConfig:
    seed: int = 0
    n_samples: int = 10_000
    n_paths: int = 20_000
    dt: float = 0.01
    n_batches: int = 8


@dataclass(frozen=True)
class OracleEstimate:
    estimate: float
    stderr: float
    n: int
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def pucci_sampling(X, params: PucciParams, n_samples: int = 10_000, seed: int = 0,
                   vertex_fraction: float = 0.5) -> dict:
    """Sampled min and max of ``-tr(M X)`` over ``lam I <= M <= Lam I``.

    ``M = Q diag(d) Q^T`` with ``Q`` a uniform rotation (one angle in 2D) and
    ``d`` uniform in ``[lam, Lam]^N``; a ``vertex_fraction`` of the draws puts
    ``d`` on a random vertex of that box instead, which is where the extremes
    live.  Every sample is admissible, so ``min_val >= M-(X)`` up to rounding.
    """
    if n_samples < 1:
        raise ConfigError("need at least one sample")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    if N not in (1, 2):
        raise ConfigError("sampling oracle supports 1x1 and 2x2 matrices")
    rng = np.random.default_rng(seed)
    d = rng.uniform(params.lam, params.Lam, size=(n_samples, N))
    n_vert = int(round(vertex_fraction * n_samples))
    d[:n_vert] = np.where(rng.random((n_vert, N)) < 0.5, params.lam, params.Lam)
    if N == 1:
        vals = -d[:, 0] * X[0, 0]
    else:
        theta = rng.uniform(0.0, 2 * np.pi, n_samples)
        c, s = np.cos(theta), np.sin(theta)
        q1 = np.stack([c, s], axis=1)
        q2 = np.stack([-s, c], axis=1)
        vals = -(d[:, 0] * np.einsum("ni,ij,nj->n", q1, X, q1)
                 + d[:, 1] * np.einsum("ni,ij,nj->n", q2, X, q2))
    return {"min_val": float(vals.min()), "max_val": float(vals.max())}


def _max_drift_slope(fns: CoefficientFns, x0: np.ndarray, alpha, span: float = 4.0) -> float:
    N = x0.size
    pts = x0 + np.linspace(-span, span, 41)[:, None] * np.ones(N)
    eps = 1e-6
    slope = 0.0
    for d in range(N):
        e = np.zeros(N)
        e[d] = eps
        db = (fns.eval_b(pts + e, alpha) - fns.eval_b(pts - e, alpha)) / (2 * eps)
        slope = max(slope, float(np.max(np.abs(db))))
    return slope


def mc_discounted_value(fns: CoefficientFns, x0, delta: float, n_paths: int = 20_000,
                        dt: float = 0.01, seed: int = 0, alpha=0,
                        n_batches: int = 8) -> OracleEstimate:
    """Monte Carlo for ``E int_0^inf exp(-delta t) l(X_t) dt`` with one control.

    Euler-Maruyama for ``dX = b dt + sqrt(2) sigma dW`` (generator
    ``tr(sigma sigma^T D^2) + b.D``).  ``l`` is held constant over each step
    and the exponential weight is integrated exactly; the path is stopped at
    ``8 / delta`` and ``l`` frozen at its last value for the tail.  Batch
    ``j`` draws from seed ``seed + j``.
    """
    if fns.sigma is None:
        raise ConfigError("the Monte Carlo oracle needs sigma with a = sigma sigma^T")
    if not delta > 0:
        raise ConfigError("delta must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    N = x0.size
    slope = _max_drift_slope(fns, x0, alpha)
    if dt * slope > 0.5:
        warnings.warn(f"dt * max|b'| = {dt * slope:.3g} > 0.5; Euler-Maruyama may be inaccurate",
                      RuntimeWarning, stacklevel=2)
    horizon = 8.0 / delta
    n_steps = int(np.ceil(horizon / dt))
    weight = (1.0 - np.exp(-delta * dt)) / delta
    decay = np.exp(-delta * dt)
    sqrt2dt = np.sqrt(2.0 * dt)

    sizes = np.full(n_batches, n_paths // n_batches)
    sizes[: n_paths % n_batches] += 1
    sizes = sizes[sizes > 0]
    # all batches advance together; batch j draws only from its own stream
    rngs = [np.random.default_rng(seed + j) for j in range(len(sizes))]
    m = int(sizes.sum())
    X = np.tile(x0, (m, 1))
    acc = np.zeros(m)
    disc = 1.0
    for _ in range(n_steps):
        acc += disc * weight * fns.eval_scalar("l", X, alpha)
        sig = fns.eval_sigma(X, alpha)
        dW = np.concatenate([r.standard_normal((k, sig.shape[-1])) for r, k in zip(rngs, sizes)])
        X = X + fns.eval_b(X, alpha) * dt + sqrt2dt * np.einsum("mij,mj->mi", sig, dW)
        disc *= decay
    acc += disc * fns.eval_scalar("l", X, alpha) / delta
    stderr = float(acc.std(ddof=1) / np.sqrt(acc.size)) if acc.size > 1 else 0.0
    return OracleEstimate(float(acc.mean()), stderr, int(acc.size), int(seed))


def gaussian_average(h: Callable, mean: float, variance: float, n_quad: int = 2001,
                     tol: float = 1e-10, max_doublings: int = 12) -> float:
    """``int h dN(mean, variance)`` by the composite trapezoid on mean +- 8 sd.

    The node count is doubled until two successive values agree to ``tol``.
    """
    if not variance > 0:
        raise ConfigError("variance must be positive")
    sd = np.sqrt(variance)

    def trap(n):
        y = np.linspace(mean - 8 * sd, mean + 8 * sd, n)
        dens = np.exp(-0.5 * (y - mean) ** 2 / variance) / np.sqrt(2 * np.pi * variance)
        f = np.broadcast_to(np.asarray(h(y), dtype=float), y.shape) * dens
        step = y[1] - y[0]
        return step * (f.sum() - 0.5 * (f[0] + f[-1]))

    n = max(3, int(n_quad))
    prev = trap(n)
    for _ in range(max_doublings):
        n = 2 * n - 1
        cur = trap(n)
        if abs(cur - prev) < tol:
            return float(cur)
        prev = cur
    raise ConfigError(f"trapezoid did not settle to {tol:g} after {max_doublings} doublings")


def dense_solve(A, b, max_size: int = 500) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ConfigError("dense_solve needs a square matrix and a matching vector")
    if n > max_size:
        raise ConfigError(f"dense_solve is limited to {max_size} unknowns")
    M = np.hstack([A, b[:, None]])
    scale = max(float(np.abs(A).max(initial=0.0)), np.finfo(float).tiny)
    for k in range(n):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        if abs(M[p, k]) <= 1e-14 * scale:
            raise ConfigError("matrix is singular to working tolerance")
        if p != k:
            M[[k, p]] = M[[p, k]]
        M[k + 1:] -= np.outer(M[k + 1:, k] / M[k, k], M[k])
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (M[k, n] - M[k, k + 1:n] @ x[k + 1:]) / M[k, k]
    res = np.max(np.abs(A @ x - b), initial=0.0)
    if res > 1e-10 * np.max(np.abs(b), initial=0.0):
        raise ConfigError(f"dense_solve residual {res:.3g} exceeds tolerance")
    return x
