"""Pointwise Pucci extremal operators, HJB Hamiltonians and radial Hessians."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ConfigError, Coefficients, Mode, as_mode

SYM_TOL = 1e-12


@dataclass(frozen=True)
class PucciParams:
    lam: float = 1.0
    Lam: float = 1.0

    def __post_init__(self):
        if not 0 < self.lam <= self.Lam:
            raise ConfigError(f"need 0 < lambda <= Lambda, got {self.lam}, {self.Lam}")


def sym_eigvals(X) -> np.ndarray:
    """Eigenvalues of a symmetric 1x1 or 2x2 matrix by the closed form, ascending."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != X.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {X.shape}")
    scale = max(1.0, float(np.max(np.abs(X))))
    if np.max(np.abs(X - X.T)) > SYM_TOL * scale:
        raise ConfigError("matrix is not symmetric")
    if X.shape == (1, 1):
        return np.array([X[0, 0]])
    if X.shape == (2, 2):
        half_tr = 0.5 * (X[0, 0] + X[1, 1])
        rad = np.hypot(0.5 * (X[0, 0] - X[1, 1]), X[0, 1])
        return np.array([half_tr - rad, half_tr + rad])
    raise ConfigError("Pucci operators are implemented for 1x1 and 2x2 matrices only")


def _pucci_from_eigs(e, pos_weight, neg_weight) -> float:
    e = np.asarray(e, dtype=float)
    return float(-pos_weight * e[e > 0].sum() - neg_weight * e[e < 0].sum())


def pucci_minus(X, params: PucciParams) -> float:
    """inf of -tr(M X) over lam I <= M <= Lam I."""
    return _pucci_from_eigs(sym_eigvals(X), params.Lam, params.lam)


def pucci_plus(X, params: PucciParams) -> float:
    """sup of -tr(M X) over lam I <= M <= Lam I."""
    return _pucci_from_eigs(sym_eigvals(X), params.lam, params.Lam)


def pucci_from_eigs(eigs, multiplicities, params: PucciParams, minus: bool = True) -> float:
    """Pucci operator for a spectrum given as (eigenvalue, multiplicity) pairs."""
    e = np.repeat(np.asarray(eigs, dtype=float), np.asarray(multiplicities, dtype=int))
    if minus:
        return _pucci_from_eigs(e, params.Lam, params.lam)
    return _pucci_from_eigs(e, params.lam, params.Lam)


def hamiltonian_terms(a, b, c0, l, t, p, X) -> np.ndarray:
    """Per-control values ``-tr(a X) - b.p + c0 t - l``.

    ``a (K, N, N)``, ``b (K, N)``, ``c0 (K,)``, ``l (K,)``.
    """
    a = np.asarray(a, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return (-np.einsum("kij,ji->k", a, X) - np.asarray(b, dtype=float) @ p
            + np.asarray(c0, dtype=float) * t - np.asarray(l, dtype=float))


def _opt(values: np.ndarray, concave: bool):
    # argmin/argmax return the first hit, i.e. the lowest control index on ties
    k = int(np.argmin(values) if concave else np.argmax(values))
    return float(values[k]), k


def hamiltonian_from_arrays(a, b, c0, l, t, p, X, mode="hjb-inf",
                            params: Optional[PucciParams] = None):
    """Optimal value over the control sample and the attaining control index.

    HJB modes optimise ``-tr(a X) - b.p + c0 t - l``.  Pucci modes replace the
    second-order part by the Pucci operator of ``X`` and optimise the rest.
    """
    mode = as_mode(mode)
    if not mode.is_pucci:
        return _opt(hamiltonian_terms(a, b, c0, l, t, p, X), mode.concave)
    if params is None:
        raise ConfigError("Pucci modes need PucciParams")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a0 = np.zeros((len(np.atleast_1d(c0)),) + X.shape)
    rest, k = _opt(hamiltonian_terms(a0, b, c0, l, t, p, X), mode.concave)
    second = pucci_minus(X, params) if mode is Mode.PUCCI_MINUS else pucci_plus(X, params)
    return second + rest, k


def hjb_hamiltonian(coefficients: Coefficients, node: int, t, p, X, mode="hjb-inf",
                    params: Optional[PucciParams] = None):
    """Hamiltonian at a tabulated node; returns ``(value, argopt_alpha)``."""
    co = coefficients.at_node(node)
    return hamiltonian_from_arrays(co["a"], co["b"], co["c0"], co["l"], t, p, X, mode, params)


@dataclass(frozen=True)
class RadialProfile:
    """Radial function Phi(r) with analytic first and second derivatives."""

    phi: Callable
    dphi: Callable
    d2phi: Callable
    name: str = ""

    def __call__(self, r):
        return self.phi(r)


def quadratic_profile() -> RadialProfile:
    return RadialProfile(lambda r: 0.5 * np.asarray(r) ** 2, lambda r: np.asarray(r, dtype=float),
                         lambda r: np.ones_like(np.asarray(r, dtype=float)), "r^2/2")


def log_profile() -> RadialProfile:
    return RadialProfile(np.log, lambda r: 1.0 / np.asarray(r), lambda r: -1.0 / np.asarray(r) ** 2,
                         "log r")


def power_profile(beta: float) -> RadialProfile:
    """r^beta / beta (beta > 0)."""
    if beta <= 0:
        raise ConfigError("power profile needs beta > 0")
    return RadialProfile(lambda r: np.asarray(r, dtype=float) ** beta / beta,
                         lambda r: np.asarray(r, dtype=float) ** (beta - 1),
                         lambda r: (beta - 1) * np.asarray(r, dtype=float) ** (beta - 2),
                         f"r^{beta:g}/{beta:g}")


def inverse_power_profile(rho: float, R: float) -> RadialProfile:
    """R^-rho - r^-rho, bounded and increasing for r >= R."""
    if rho <= 0 or R <= 0:
        raise ConfigError("inverse power profile needs rho > 0 and R > 0")
    return RadialProfile(lambda r: R ** -rho - np.asarray(r, dtype=float) ** -rho,
                         lambda r: rho * np.asarray(r, dtype=float) ** (-rho - 1),
                         lambda r: -rho * (rho + 1) * np.asarray(r, dtype=float) ** (-rho - 2),
                         f"R^-{rho:g} - r^-{rho:g}")


def radial_hessian_eigs(profile: RadialProfile, r: float, dim: int):
    """Hessian spectrum of ``Phi(|x|)`` at radius r.

    Returns ``(Phi''(r), Phi'(r)/r, dim - 1)``: the radial eigenvalue is
    simple, the tangential one has multiplicity ``dim - 1``.
    """
    if not r > 0:
        raise ConfigError("radial Hessian is undefined at r = 0")
    return float(profile.d2phi(r)), float(profile.dphi(r) / r), int(dim) - 1


def radial_derivatives(profile: RadialProfile, x):
    """Gradient and Hessian of ``Phi(|x|)`` at the point ``x != 0``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = float(np.linalg.norm(x))
    simple, repeated, _ = radial_hessian_eigs(profile, r, x.size)
    e = x / r
    proj = np.outer(e, e)
    grad = float(profile.dphi(r)) * e
    hess = simple * proj + repeated * (np.eye(x.size) - proj)
    return grad, hess
