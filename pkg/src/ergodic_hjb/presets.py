"""Named problems runnable from the command line.

Closures are written for ``(m, N)`` point arrays, so most presets also run
in two dimensions.  Preset constants can be overridden through ``params``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import CoefficientFns, ConfigError


def _r2(x):
    return np.sum(x ** 2, axis=1)


def explicit_cost(x):
    """``2 (r^4 + 2 r^2 - 1) / (r^2 + 1)^2``; the corrector is ``log(1 + r^2)`` in 1D."""
    r2 = _r2(x)
    return 2 * (r2 ** 2 + 2 * r2 - 1) / (r2 + 1) ** 2


H0_LIBRARY = {
    "lorentz": lambda x: 1.0 / (1.0 + _r2(x)),
    "sin-gauss": lambda x: np.sin(3 * x[:, 0]) * np.exp(-_r2(x)),
    "cos-lorentz": lambda x: np.cos(x[:, 0]) / (1.0 + _r2(x)),
    "tanh": lambda x: np.tanh(x[:, 0]),
}


def initial_datum(name: str) -> Callable:
    """Look up an initial datum; ``const:<v>`` gives a constant."""
    if name.startswith("const:"):
        try:
            v = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad constant initial datum {name!r}") from exc
        return lambda x: np.full(x.shape[0], v)
    if name not in H0_LIBRARY:
        raise ConfigError(f"unknown initial datum {name!r}; choose from "
                          f"{sorted(H0_LIBRARY)} or const:<v>")
    return H0_LIBRARY[name]


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    build: Callable                      # params dict -> CoefficientFns
    dim: int = 1
    halfwidth: float = 6.0
    n_per_dim: int = 481
    mode: str = "hjb-inf"
    pucci_lambda: float = 1.0
    pucci_Lambda: float = 1.0
    h0: str = "lorentz"
    T_final: float = 40.0
    defaults: dict = field(default_factory=dict)
    # (mean, variance) of the invariant Gaussian, when the preset has one
    gaussian: Optional[Callable] = None

    def fns(self, params: Optional[dict] = None) -> CoefficientFns:
        merged = dict(self.defaults)
        merged.update(params or {})
        return self.build(merged)

    def params(self, params: Optional[dict] = None) -> dict:
        merged = dict(self.defaults)
        merged.update(params or {})
        return merged


def _ou_linear(p):
    gamma, m, sigma = p["gamma"], p["m"], p["sigma"]
    if not gamma > 0:
        raise ConfigError("ou-linear needs gamma > 0")
    return CoefficientFns(a=lambda x, al: sigma ** 2, b=lambda x, al: gamma * (m - x),
                          sigma=lambda x, al: sigma)


PRESETS = {
    "paper-example": Preset(
        "paper-example", "a = 1, b = -x, l = 2(r^4 + 2r^2 - 1)/(r^2 + 1)^2; c = 0, chi = log(1 + x^2)",
        lambda p: CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x,
                                 l=lambda x, al: explicit_cost(x) + p["shift"],
                                 sigma=lambda x, al: 1.0),
        defaults={"shift": 0.0}),
    "ou-1d": Preset(
        "ou-1d", "a = 1, b = -x, c0 = 0, l = 0",
        lambda p: CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x, sigma=lambda x, al: 1.0)),
    "ou-linear": Preset(
        "ou-linear", "a = sigma^2, b = gamma (m - x), l = 0; invariant law N(m, sigma^2/gamma)",
        _ou_linear, halfwidth=8.0, n_per_dim=321, T_final=40.0,
        defaults={"gamma": 1.0, "m": 0.0, "sigma": 1.0},
        gaussian=lambda p: (p["m"], p["sigma"] ** 2 / p["gamma"])),
    "pucci-ou": Preset(
        "pucci-ou", "Pucci minimal operator (lambda = 1, Lambda = 2) with b = -x, l = 0",
        lambda p: CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x),
        n_per_dim=121, mode="pucci-minus", pucci_lambda=1.0, pucci_Lambda=2.0, h0="sin-gauss"),
    "strong-drift": Preset(
        "strong-drift", "a = 1, b = -x |x|^2, l = cos(2 x_1): bounded corrector",
        lambda p: CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x * _r2(x)[:, None],
                                 l=lambda x, al: np.cos(2 * x[:, 0]), sigma=lambda x, al: 1.0)),
    "constant-cost": Preset(
        "constant-cost", "a = 1, b = -x, l = level (default 2); c = -level",
        lambda p: CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x,
                                 l=lambda x, al: p["level"], sigma=lambda x, al: 1.0),
        defaults={"level": 2.0}),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
