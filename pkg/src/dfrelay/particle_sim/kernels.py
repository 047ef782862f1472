"""Per-time-step particle kernels.

Each kernel advances every molecule of one species by one step relative to
the centre of the sphere that binds it. Random inputs are drawn by the
caller, so the numba and numpy paths consume identical streams.

Boundary rules
--------------
``RULE_ROBIN`` (default)
    The free step is taken and mirrored at the surface when it ends inside.
    With ``x`` and ``y`` the start and (mirrored) end distances from the
    surface, the molecule binds with the probability that a Brownian bridge
    between them meets a partially absorbing plane of rate ``k_on``:

        B(x, y) = k' sqrt(4 pi D dt) erfcx(z) / (1 + exp(x y / (D dt)))
        z = (x + y) / (2 sqrt(D dt)) + k' sqrt(D dt),   k' = k_on / D

    ``B`` is symmetric in ``x`` and ``y`` and tends to the absorbing-bridge
    crossing probability ``2 / (1 + exp(x y / D dt))`` as ``k_on`` grows.
``RULE_ERBAN_CHAPMAN``
    Contact only when the step ends inside; bind with
    ``min(1, k_on sqrt(pi dt / D))``, otherwise mirror.

Binding places the molecule at the radial projection of its end point.
A bound molecule is released with probability ``p_unbind`` per step. With
``PLACE_BALANCED`` its distance from the surface is drawn by inverse CDF
from ``x_grid``/``cdf`` (see :mod:`.desorption`); ``PLACE_HALF_GAUSSIAN``
uses ``|g|`` with ``g ~ N(0, 2 D dt)`` and ``PLACE_FIXED`` a constant
``offset``. A molecule released in a step does not move again in that step.
"""

import math

import numpy as np
from scipy.special import erfcx as _erfcx_scipy

from .._accel import HAVE_NUMBA, njit

RULE_ROBIN = 0
RULE_ERBAN_CHAPMAN = 1

PLACE_HALF_GAUSSIAN = 0
PLACE_FIXED = 1
PLACE_BALANCED = 2

_EMPTY = np.array([0.0, 1.0])
_SQRT_PI = math.sqrt(math.pi)


@njit(cache=True, nogil=True)
def _erfcx(z):
    # exp(z^2) erfc(z) for z >= 0; asymptotic series where erfc underflows
    if z < 25.0:
        return math.exp(z * z) * math.erfc(z)
    iz2 = 1.0 / (z * z)
    return (1.0 - 0.5 * iz2 * (1.0 - 1.5 * iz2 * (1.0 - 2.5 * iz2))) / (z * _SQRT_PI)


@njit(cache=True, nogil=True)
def _bridge_binding(x, y, kp, D, dt):
    e = x * y / (D * dt)
    if e > 700.0:
        return 0.0
    sdt = math.sqrt(D * dt)
    z = 0.5 * (x + y) / sdt + kp * sdt
    return kp * 2.0 * sdt * _SQRT_PI * _erfcx(z) / (1.0 + math.exp(e))


def bridge_binding(x, y, k_on, D, dt):
    """Vectorized ``B(x, y)``; ``x, y >= 0`` are distances from the surface."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    kp = k_on / D
    sdt = math.sqrt(D * dt)
    z = 0.5 * (x + y) / sdt + kp * sdt
    with np.errstate(over="ignore"):
        out = kp * 2.0 * sdt * _SQRT_PI * _erfcx_scipy(z) / (1.0 + np.exp(x * y / (D * dt)))
    return np.where(x * y / (D * dt) > 700.0, 0.0, out)


@njit(cache=True, nogil=True)
def _step_numba(pos, bound, normals, u1, u2, sigma, radius, D, dt, p_unbind, k_on,
                rule, placement, offset, x_grid, cdf):
    n = pos.shape[0]
    kp = k_on / D
    p_on_ec = min(1.0, k_on * math.sqrt(math.pi * dt / D))
    n_bound = 0
    for i in range(n):
        x = pos[i, 0]
        y = pos[i, 1]
        z = pos[i, 2]
        if bound[i]:
            if u1[i] < p_unbind:
                if placement == PLACE_BALANCED:
                    delta = np.interp(u2[i], cdf, x_grid)
                elif placement == PLACE_HALF_GAUSSIAN:
                    delta = abs(normals[i, 0]) * sigma
                else:
                    delta = offset
                rr = math.sqrt(x * x + y * y + z * z)
                s = (radius + delta) / rr
                pos[i, 0] = x * s
                pos[i, 1] = y * s
                pos[i, 2] = z * s
                bound[i] = False
            else:
                n_bound += 1
            continue
        r0 = math.sqrt(x * x + y * y + z * z)
        x1 = x + sigma * normals[i, 0]
        y1 = y + sigma * normals[i, 1]
        z1 = z + sigma * normals[i, 2]
        r1 = math.sqrt(x1 * x1 + y1 * y1 + z1 * z1)
        inside = r1 < radius
        if rule == RULE_ROBIN:
            p_bind = 0.0
            if k_on > 0.0:
                p_bind = _bridge_binding(r0 - radius, abs(r1 - radius), kp, D, dt)
        else:
            p_bind = p_on_ec if inside else 0.0
        if u2[i] < p_bind:
            s = radius / r1
            bound[i] = True
            n_bound += 1
        elif inside:
            s = (2.0 * radius - r1) / r1
        else:
            s = 1.0
        pos[i, 0] = x1 * s
        pos[i, 1] = y1 * s
        pos[i, 2] = z1 * s
    return n_bound


def _norm(p):
    return np.sqrt(p[:, 0] * p[:, 0] + p[:, 1] * p[:, 1] + p[:, 2] * p[:, 2])


def _step_numpy(pos, bound, normals, u1, u2, sigma, radius, D, dt, p_unbind, k_on,
                rule, placement, offset, x_grid, cdf):
    was_bound = bound.copy()

    ib = np.flatnonzero(was_bound & (u1 < p_unbind))
    if ib.size:
        if placement == PLACE_BALANCED:
            delta = np.interp(u2[ib], cdf, x_grid)
        elif placement == PLACE_HALF_GAUSSIAN:
            delta = np.abs(normals[ib, 0]) * sigma
        else:
            delta = np.full(ib.size, offset)
        s = (radius + delta) / _norm(pos[ib])
        pos[ib] = pos[ib] * s[:, None]
        bound[ib] = False

    jf = np.flatnonzero(~was_bound)
    if jf.size:
        x0 = pos[jf]
        r0 = _norm(x0)
        x1 = x0 + sigma * normals[jf]
        r1 = _norm(x1)
        inside = r1 < radius
        if rule == RULE_ROBIN:
            if k_on > 0.0:
                p_bind = bridge_binding(r0 - radius, np.abs(r1 - radius), k_on, D, dt)
            else:
                p_bind = np.zeros_like(r1)
        else:
            p_bind = np.where(inside, min(1.0, k_on * math.sqrt(math.pi * dt / D)), 0.0)
        binds = u2[jf] < p_bind
        refl = inside & ~binds
        s = np.ones_like(r1)
        s[binds] = radius / r1[binds]
        s[refl] = (2.0 * radius - r1[refl]) / r1[refl]
        pos[jf] = x1 * s[:, None]
        bound[jf[binds]] = True
    return int(np.count_nonzero(bound))


def step(pos, bound, normals, u1, u2, sigma, radius, D, dt, p_unbind, k_on,
         rule=RULE_ROBIN, placement=PLACE_HALF_GAUSSIAN, offset=0.0, x_grid=None, cdf=None,
         use_numba=None):
    """Advance all molecules one step in place; returns the bound count after the step."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    fn = _step_numba if use_numba else _step_numpy
    return fn(pos, bound, normals, u1, u2, float(sigma), float(radius), float(D), float(dt),
              float(p_unbind), float(k_on), int(rule), int(placement), float(offset),
              _EMPTY if x_grid is None else x_grid, _EMPTY if cdf is None else cdf)
