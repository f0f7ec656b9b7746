"""Sampled checks of the structural and Lyapunov conditions at infinity.

Every condition has the shape ``sup_alpha LHS(x, alpha) <= RHS(x)`` for
``|x| >= R0``.  At each sampled radius the left side is maximised over the
control sample and a fan of directions; the slack ``RHS - LHS`` is recorded
and ``R0`` is the smallest sampled radius from which the slack never goes
negative again.  A finite sample is evidence, not proof; reports say so.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CoefficientFns, ConfigError, ControlSet, Mode, as_mode
from .operators import (PucciParams, RadialProfile, hamiltonian_from_arrays, inverse_power_profile,
                        log_profile, power_profile, quadratic_profile, radial_derivatives)

EVIDENCE = "sampled evidence"


class ConditionId(str, enum.Enum):
    C4 = "C4"
    C4BIS = "C4bis"
    OU_FORM = "OU-form"
    C5 = "C5"
    C6_5 = "C6.5"
    C4QL = "C4QL"
    C10 = "C10"
    C10STRONG = "C10strong"
    C10OU = "C10ou"
    C10EXTRASTRONG = "C10extrastrong"
    C10LESSSTRONG = "C10lessstrong"


def as_condition(cid) -> ConditionId:
    if isinstance(cid, ConditionId):
        return cid
    for member in ConditionId:
        if str(cid).lower() == member.value.lower():
            return member
    raise ConfigError(f"unknown condition {cid!r}; choose from {[c.value for c in ConditionId]}")


@dataclass
class ConditionReport:
    id: ConditionId
    holds: bool
    R0: Optional[float]
    margins: list                       # [(r, slack)], increasing r
    params: dict = field(default_factory=dict)
    evidence: str = EVIDENCE

    def slack_at(self, r: float) -> float:
        for rr, s in self.margins:
            if np.isclose(rr, r):
                return s
        raise KeyError(r)

    def to_json(self) -> dict:
        return {"id": self.id.value, "holds": self.holds, "R0": self.R0,
                "margins": [[float(r), float(s)] for r, s in self.margins],
                "params": {k: _jsonable(v) for k, v in self.params.items()},
                "evidence": self.evidence}


def _jsonable(v):
    if callable(v):
        return getattr(v, "__name__", "<callable>")
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def directions(dim: int, angular_samples: int = 64) -> np.ndarray:
    """Unit directions: ``+-1`` in 1D, a uniform fan in 2D."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        if angular_samples < 1:
            raise ConfigError("angular_samples must be positive")
        th = 2 * np.pi * np.arange(angular_samples) / angular_samples
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    raise ConfigError("dimension must be 1 or 2")


def _need(params: dict, *names):
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise ConfigError(f"condition needs parameter(s) {', '.join(missing)}")
    return [params[n] for n in names]


def _ellipticity_rhs(params: dict, dim: int) -> float:
    lam, Lam = _need(params, "lam", "Lam")
    PucciParams(lam, Lam)
    return lam - (dim - 1) * Lam


def _vec(fn, x) -> np.ndarray:
    m, n = x.shape
    v = np.asarray(fn(x), dtype=float)
    if n == 1 and v.ndim == 1 and v.shape[0] == m:
        v = v[:, None]
    return np.array(np.broadcast_to(v, (m, n)))


def _scal(fn, x) -> np.ndarray:
    return np.array(np.broadcast_to(np.asarray(fn(x), dtype=float), (x.shape[0],)))


def _split_drift(fns: CoefficientFns, controls: ControlSet, x):
    """``bbar = mean_alpha b``, ``g = max_alpha |b - bbar|`` over the control sample."""
    bs = np.stack([fns.eval_b(x, al) for al in controls.points])
    bbar = bs.mean(axis=0)
    g = np.linalg.norm(bs - bbar, axis=-1).max(axis=0)
    return bbar, g


def _lhs_rhs(cid: ConditionId, fns: CoefficientFns, params: dict, controls: ControlSet, x):
    """Per-control LHS ``(K, m)`` and RHS ``(m,)`` at the points ``x``."""
    m, dim = x.shape
    r = np.linalg.norm(x, axis=1)
    K = len(controls)

    def per_control(f):
        return np.stack([f(al) for al in controls.points])

    tr_a = per_control(lambda al: np.trace(fns.eval_a(x, al), axis1=1, axis2=2))
    bx = per_control(lambda al: np.einsum("mi,mi->m", fns.eval_b(x, al), x))
    c0 = per_control(lambda al: fns.eval_scalar("c0", x, al))
    zero = np.zeros(m)

    if cid is ConditionId.C4:
        return tr_a + bx - 0.5 * c0 * r ** 2, zero
    if cid is ConditionId.C4BIS:
        return tr_a + bx, zero - float(params.get("eps", 0.0))
    if cid is ConditionId.OU_FORM:
        gamma, = _need(params, "gamma")
        if not gamma > 0:
            raise ConfigError("OU form needs gamma > 0")
        mean = np.broadcast_to(np.asarray(params.get("m", 0.0), dtype=float), (dim,))
        tol = float(params.get("tol", 1e-2))
        ou = gamma * (mean - x)
        rem = per_control(lambda al: np.einsum("mi,mi->m", fns.eval_b(x, al) - ou, x))
        return np.abs(rem) / r ** 2, zero + tol
    if cid is ConditionId.C5:
        return bx - c0 * r ** 2 * np.log(r), zero + _ellipticity_rhs(params, dim)
    if cid is ConditionId.C6_5:
        bbar_fn, g_fn = _need(params, "bbar", "g")
        cbar = _scal(params["cbar"], x) if params.get("cbar") is not None else zero
        g = _scal(g_fn, x)
        if np.any(g < 0) or np.any(cbar < 0):
            raise ConfigError("C6.5 needs g >= 0 and cbar >= 0")
        lhs = np.einsum("mi,mi->m", _vec(bbar_fn, x), x) + g * r
        return lhs[None], cbar * r ** 2 * np.log(r) + _ellipticity_rhs(params, dim)
    if cid is ConditionId.C4QL:
        if fns.sigma is None:
            raise ConfigError("C4QL needs the sigma closure")
        sig2 = per_control(lambda al: np.sum(fns.eval_sigma(x, al) ** 2, axis=(1, 2)))
        return sig2.max(axis=0)[None] + bx - 0.5 * c0 * r ** 2, zero
    if cid is ConditionId.C10:
        rhs = zero + _ellipticity_rhs(params, dim)
        pairs = []
        if params.get("b1") is not None or params.get("b2") is not None:
            for i in (1, 2):
                b_fn, g_fn = _need(params, f"b{i}", f"g{i}")
                pairs.append((_vec(b_fn, x), _scal(g_fn, x)))
        else:
            pairs.append(_split_drift(fns, controls, x))
        lhs = np.stack([np.einsum("mi,mi->m", b, x) + g * r for b, g in pairs])
        return lhs, rhs
    if cid is ConditionId.C10STRONG:
        M, = _need(params, "M")
        return tr_a + bx, zero - M
    if cid is ConditionId.C10OU:
        M, beta = _need(params, "M", "beta")
        if not 0 <= beta < 2:
            raise ConfigError("C10ou needs 0 <= beta < 2")
        return tr_a + bx, -M * r ** (2 - beta)
    if cid in (ConditionId.C10EXTRASTRONG, ConditionId.C10LESSSTRONG):
        rho, c_abs, l_inf = _need(params, "rho", "c", "l_inf")
        if not rho > 0:
            raise ConfigError("rho must be positive")
        rhs = -(2 * abs(c_abs) + abs(l_inf)) / rho * r ** (2 + rho)
        lhs = tr_a + bx
        if cid is ConditionId.C10LESSSTRONG:
            lam, = _need(params, "lam")
            lhs = lhs - lam * (2 + rho)
        return lhs, rhs
    raise ConfigError(f"no checker for {cid}")          # pragma: no cover


def check_condition(cid, fns: CoefficientFns, params: Optional[dict] = None,
                    radial_samples: Sequence[float] = (), angular_samples: int = 64,
                    controls: Optional[ControlSet] = None, dim: int = 1) -> ConditionReport:
    """Slack of condition ``cid`` at every sampled radius and the resulting ``R0``.

    ``params`` supplies the constants the condition refers to: ``M``,
    ``beta``, ``rho``, ``c`` and ``l_inf``, ``gamma`` and ``m``, ``lam`` and
    ``Lam``, the closures ``bbar``, ``g``, ``cbar`` (C6.5) and optionally
    ``b1, g1, b2, g2`` (C10).  Without them C10 splits the drift over the
    control sample into its mean and the largest deviation from it.
    """
    cid = as_condition(cid)
    params = dict(params or {})
    controls = controls or ControlSet.single()
    radii = np.sort(np.asarray(list(radial_samples), dtype=float))
    if radii.size == 0:
        raise ConfigError("radial_samples is empty")
    if np.any(radii <= 0):
        raise ConfigError("radial samples must be positive")
    dirs = directions(dim, angular_samples)
    x = (radii[:, None, None] * dirs[None]).reshape(-1, dim)
    lhs, rhs = _lhs_rhs(cid, fns, params, controls, x)
    slack = (rhs - lhs.max(axis=0)).reshape(radii.size, len(dirs)).min(axis=1)

    bad = np.flatnonzero(slack < 0)
    start = 0 if bad.size == 0 else bad[-1] + 1
    holds = start < radii.size
    R0 = float(radii[start]) if holds else None
    used = {k: v for k, v in params.items() if v is not None}
    used.setdefault("dim", dim)
    return ConditionReport(cid, bool(holds), R0, list(zip(radii.tolist(), slack.tolist())), used)


def suggest_lyapunov(cid, params: Optional[dict] = None) -> RadialProfile:
    """The radial Lyapunov profile that goes with condition ``cid``.

    C4 family: ``r^2/2`` (``r^k/k`` for C10strong with ``k``); C5, C6.5 and
    C10: ``log r``; C10ou: ``r^beta/beta`` (``log r`` at ``beta = 0``);
    C10extrastrong and C10lessstrong: ``R^-rho - r^-rho``.
    """
    cid = as_condition(cid)
    params = dict(params or {})
    if cid in (ConditionId.C4, ConditionId.C4BIS, ConditionId.OU_FORM, ConditionId.C4QL):
        return quadratic_profile()
    if cid is ConditionId.C10STRONG:
        k = params.get("k")
        if k is None:
            return quadratic_profile()
        if not k >= 2:
            raise ConfigError("the r^k/k profile is paired with k >= 2")
        return power_profile(float(k))
    if cid in (ConditionId.C5, ConditionId.C6_5, ConditionId.C10):
        return log_profile()
    if cid is ConditionId.C10OU:
        beta, = _need(params, "beta")
        return log_profile() if beta == 0 else power_profile(float(beta))
    rho, R = _need(params, "rho", "R")
    return inverse_power_profile(float(rho), float(R))


_DUAL = {Mode.HJB_INF: Mode.HJB_SUP, Mode.HJB_SUP: Mode.HJB_INF,
         Mode.PUCCI_MINUS: Mode.PUCCI_PLUS, Mode.PUCCI_PLUS: Mode.PUCCI_MINUS}


def verify_supersolution(profile: RadialProfile, fns: CoefficientFns, radii: Sequence[float],
                         mode="hjb-inf", params: Optional[PucciParams] = None,
                         controls: Optional[ControlSet] = None, dim: int = 1,
                         angular_samples: int = 64, dual: bool = False) -> float:
    """Smallest sampled value of ``G[w]`` for ``w = Phi(|x|)``.

    ``G`` is the operator without the running cost, optimised over the
    control sample: ``-tr(a D^2w) - b.Dw + c0 w`` (the Pucci modes replace
    the trace term).  With ``dual=True`` the mirror function ``W = -w`` is
    tested as a subsolution of the dual operator and ``-G~[W]`` is returned,
    so in both cases a nonnegative result confirms the Lyapunov property.
    """
    mode = as_mode(mode)
    if mode.is_pucci and params is None:
        raise ConfigError("Pucci modes need PucciParams")
    controls = controls or ControlSet.single()
    radii = np.asarray(list(radii), dtype=float)
    if radii.size == 0:
        raise ConfigError("radii is empty")
    if np.any(radii <= 0):
        raise ConfigError("G[w] of a radial profile is undefined at r = 0")
    sign = -1.0 if dual else 1.0
    op_mode = _DUAL[mode] if dual else mode
    worst = np.inf
    for x in (radii[:, None, None] * directions(dim, angular_samples)[None]).reshape(-1, dim):
        grad, hess = radial_derivatives(profile, x)
        pts = x[None]
        a = np.stack([fns.eval_a(pts, al)[0] for al in controls.points])
        b = np.stack([fns.eval_b(pts, al)[0] for al in controls.points])
        c0 = np.array([fns.eval_scalar("c0", pts, al)[0] for al in controls.points])
        w = sign * float(profile(np.linalg.norm(x)))
        val, _ = hamiltonian_from_arrays(a, b, c0, np.zeros(len(c0)), w, sign * grad, sign * hess,
                                         op_mode, params)
        worst = min(worst, sign * val)
    return float(worst)
