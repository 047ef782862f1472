"""Desorption rule in detailed balance with the discrete binding rule.

Let ``P_b(x)`` be the probability that a free molecule starting a distance
``x`` outside a reactive sphere of radius ``a`` binds during one step. At the
continuum equilibrium the bound surface density is ``(k_on / k_off) c`` for
free density ``c``, so equating the one-step binding flux out of every shell
with the one-step release flux into it gives

    release probability per step   p = (k_off / k_on) * int (1 + x/a)^2 P_b(x) dx
    release distance density       q(x) proportional to (1 + x/a)^2 P_b(x).

A molecule released this way and one that never bound are then statistically
indistinguishable at equilibrium, whatever the step size.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson

from . import kernels

_N_X = 400
_N_Z = 1601
_N_U = 40
_Z_SPAN = 9.0
_X_SPAN = 5.5


def binding_probability(x, radius: float, k_on: float, D: float, dt: float,
                        rule: int = kernels.RULE_ROBIN) -> np.ndarray:
    """One-step binding probability ``P_b(x)`` of the kernel's boundary rule.

    The step is split into its radial component (Simpson rule on a uniform
    grid) and the perpendicular magnitude (Gauss-Laguerre in ``rho^2 / 2 sigma^2``).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sigma = math.sqrt(2.0 * D * dt)
    z = np.linspace(-_Z_SPAN * sigma, _Z_SPAN * sigma, _N_Z)
    gz = np.exp(-0.5 * (z / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    u, wu = np.polynomial.laguerre.laggauss(_N_U)
    rho2 = 2.0 * sigma * sigma * u
    p_on = min(1.0, k_on * math.sqrt(math.pi * dt / D))
    out = np.empty(x.shape)
    for i, xi in enumerate(x):
        r1 = np.sqrt((radius + xi + z[:, None]) ** 2 + rho2[None, :])
        if rule == kernels.RULE_ROBIN:
            bind = kernels.bridge_binding(xi, np.abs(r1 - radius), k_on, D, dt)
        else:
            bind = (r1 < radius) * p_on
        out[i] = simpson(gz * (bind @ wu), x=z)
    return out


@dataclass(frozen=True)
class BalancedDesorption:
    p_release: float
    x_grid: np.ndarray
    cdf: np.ndarray


@lru_cache(maxsize=64)
def balanced_desorption(radius: float, k_on: float, k_off: float, D: float, dt: float,
                        rule: int = kernels.RULE_ROBIN) -> BalancedDesorption:
    """Release probability and inverse-CDF table of the balanced desorption rule."""
    if k_off == 0.0 or k_on == 0.0:
        return BalancedDesorption(0.0, np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    scale = 2.0 * math.sqrt(D * dt)
    x = np.linspace(0.0, _X_SPAN * scale, _N_X)
    w = (1.0 + x / radius) ** 2 * binding_probability(x, radius, k_on, D, dt, rule)
    cdf = cumulative_trapezoid(w, x, initial=0.0)
    total = float(cdf[-1])
    p = k_off / k_on * total
    if p > 1.0:
        warnings.warn(f"balanced release probability {p:.3g} exceeds 1 and is capped; "
                      "reduce dt", RuntimeWarning, stacklevel=2)
        p = 1.0
    return BalancedDesorption(p, x, cdf / total)
