"""Special functions, Skellam distribution and semi-infinite quadrature.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

DEFAULT_TOL = 1e-9

# neglected probability mass when truncating Skellam supports
TAIL_MASS = 1e-13


class QuadratureError(RuntimeError):
    """Raised when a semi-infinite integral does not converge.

    Attributes
    ----------
    estimate : float
        Best estimate available when the iteration stopped.
    error : float
        Achieved error estimate for ``estimate``.
    """

    def __init__(self, message: str, estimate: float = math.nan, error: float = math.inf):
        super().__init__(f"{message} (best estimate {estimate:.6g}, achieved error {error:.3g})")
        self.estimate = estimate
        self.error = error


# ---------------------------------------------------------------------------
# Modified Bessel function of the first kind, log scale
# ---------------------------------------------------------------------------

def _log_bessel_series(order: int, x: float) -> float:
    # ascending series, all terms positive so summation is well conditioned
    if x == 0.0:
        return 0.0 if order == 0 else -math.inf
    q = 0.25 * x * x
    log_q = 2.0 * math.log(0.5 * x)  # q itself underflows for subnormal x
    lead = order * math.log(0.5 * x) - math.lgamma(order + 1.0)
    log_terms = [0.0]
    lt = 0.0
    k = 0
    peak = 0.0
    while True:
        k += 1
        lt += log_q - math.log(k * (order + k))
        log_terms.append(lt)
        peak = max(peak, lt)
        # terms start decreasing once k(order+k) > q; stop when negligible
        if k * (order + k) > q and lt < peak - 40.0:
            break
    arr = np.asarray(log_terms)
    if peak == 0.0:
        # all terms <= 1: log1p keeps precision for tiny corrections
        return lead + math.log1p(float(np.sum(np.exp(arr[1:]))))
    return lead + peak + math.log(float(np.sum(np.exp(arr - peak))))


def log_bessel_i(order, x):
    """Natural log of the modified Bessel function ``I_order(x)``.

    Works in log space so that huge orders or arguments do not overflow.
    Small arguments and the far-underflow region use the ascending series;
    everything else uses scipy's exponentially scaled ``ive``.

    Parameters
    ----------
    order : int or array_like of int
        Non-negative integer order.
    x : float or array_like
        Non-negative argument.

    Returns
    -------
    float or ndarray
        ``ln I_order(x)``; ``-inf`` where ``I_order(x) == 0`` (x = 0, order > 0).
    """
    order_arr, x_arr = np.broadcast_arrays(np.asarray(order), np.asarray(x, dtype=float))
    if np.any(x_arr < 0) or np.any(np.isnan(x_arr)):
        raise ValueError("log_bessel_i: argument must be >= 0")
    if np.any(order_arr < 0):
        raise ValueError("log_bessel_i: order must be >= 0 (use I_-m = I_m)")
    order_arr = order_arr.astype(np.int64)
    with np.errstate(divide="ignore"):
        scaled = special.ive(order_arr, x_arr)
        out = np.log(scaled) + x_arr
    # series where x is small (ive loses relative precision of ln I near 0)
    # or where ive underflows
    bad = (x_arr <= 2.0) | ~(scaled > 1e-290) | ~np.isfinite(out)
    if np.any(bad):
        idx = np.flatnonzero(bad.ravel())
        flat_o = order_arr.ravel()
        flat_x = x_arr.ravel()
        flat_out = out.ravel().copy()
        for i in idx:
            flat_out[i] = _log_bessel_series(int(flat_o[i]), float(flat_x[i]))
        out = flat_out.reshape(out.shape)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Skellam distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SkellamDist:
    """Difference ``X1 - X2`` of independent Poisson counts with means ``lambda1``, ``lambda2``."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"SkellamDist.{name} must be finite and >= 0, got {v!r}")

    @property
    def mean(self) -> float:
        return self.lambda1 - self.lambda2

    @property
    def var(self) -> float:
        return self.lambda1 + self.lambda2

    def support_window(self, tail: float = TAIL_MASS) -> tuple[int, int]:
        """Integer window ``[lo, hi]`` holding all but ``~2*tail`` of the mass.

        ``X1 - X2 <= m`` requires ``X2 >= -m`` and ``X1 - X2 >= m`` requires
        ``X1 >= m``, so Poisson upper quantiles bound both tails rigorously.
        """
        hi = int(stats.poisson.isf(tail, self.lambda1)) + 1 if self.lambda1 > 0 else 0
        lo = -(int(stats.poisson.isf(tail, self.lambda2)) + 1) if self.lambda2 > 0 else 0
        return lo, hi

    def pmf(self, m):
        return skellam_pmf(m, self)

    def cdf(self, m):
        return skellam_cdf(m, self)

    def sf(self, m):
        return skellam_sf(m, self)


def _log_poisson(k, lam):
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = k * np.log(lam) - lam - special.gammaln(k + 1.0)
    return np.where(k >= 0, out, -np.inf)


def skellam_logpmf(m, dist: SkellamDist):
    """Log-PMF of the Skellam distribution, vectorized over integer ``m``."""
    m = np.asarray(m)
    l1, l2 = dist.lambda1, dist.lambda2
    if l1 == 0.0 and l2 == 0.0:
        out = np.where(m == 0, 0.0, -np.inf)
    elif l2 == 0.0:
        out = _log_poisson(m, l1)
    elif l1 == 0.0:
        out = _log_poisson(-m, l2)
    else:
        # product of square roots: l1 * l2 loses digits when one mean is subnormal
        x = 2.0 * math.sqrt(l1) * math.sqrt(l2)
        # -(l1 + l2) + x folded into one term; (l1/l2)^(m/2) combined before exp
        base = -((math.sqrt(l1) - math.sqrt(l2)) ** 2) + 0.5 * m * (math.log(l1) - math.log(l2))
        absm = np.abs(m).astype(np.int64)
        with np.errstate(divide="ignore"):
            scaled = special.ive(absm, x)
            lb = np.log(scaled)
        bad = ~(scaled > 1e-290)
        if np.any(bad):
            lb = np.array(lb, dtype=float, ndmin=1)
            flat_m = np.array(absm, ndmin=1)
            for i in np.flatnonzero(bad.ravel()):
                lb.ravel()[i] = _log_bessel_series(int(flat_m.ravel()[i]), x) - x
            lb = lb.reshape(np.shape(absm))
        out = base + lb
    if np.ndim(out) == 0:
        return float(out)
    return out


def skellam_pmf(m, dist: SkellamDist):
    """Skellam PMF ``P(X1 - X2 = m)``, computed in log space.

    ``exp(-(l1+l2)) (l1/l2)^(m/2) I_|m|(2 sqrt(l1 l2))``; a zero mean on
    either side degenerates to a (negated) Poisson PMF.
    """
    out = np.exp(skellam_logpmf(m, dist))
    if np.ndim(out) == 0:
        return float(out)
    return out


def _cumulative(dist: SkellamDist):
    lo, hi = dist.support_window()
    ms = np.arange(lo, hi + 1)
    p = skellam_pmf(ms, dist)
    return lo, hi, np.cumsum(p), np.cumsum(p[::-1])[::-1]


def skellam_cdf(m, dist: SkellamDist):
    """``P(X1 - X2 <= m)``; monotone in ``m``, exactly 0/1 outside the support window."""
    lo, hi, lower, _ = _cumulative(dist)
    m = np.asarray(m)
    idx = np.clip(m - lo, 0, hi - lo)
    out = np.where(m < lo, 0.0, np.where(m >= hi, 1.0, lower[idx]))
    out = np.minimum(out, 1.0)
    return float(out) if out.ndim == 0 else out


def skellam_sf(m, dist: SkellamDist):
    """``P(X1 - X2 > m)`` summed from the upper tail (no ``1 - cdf`` cancellation)."""
    lo, hi, _, upper = _cumulative(dist)
    m = np.asarray(m)
    idx = np.clip(m + 1 - lo, 0, hi - lo)
    out = np.where(m < lo, 1.0, np.where(m >= hi, 0.0, upper[idx]))
    out = np.minimum(out, 1.0)
    return float(out) if out.ndim == 0 else out


def skellam_tables(dist: SkellamDist, taus):
    """Vectorized ``(P(N < tau), P(N >= tau))`` for an array of thresholds."""
    taus = np.asarray(taus)
    return skellam_cdf(taus - 1, dist), skellam_sf(taus - 1, dist)


# ---------------------------------------------------------------------------
# Semi-infinite quadrature
# ---------------------------------------------------------------------------

OSC_SIN = "oscillatory-sin"
OSC_COS = "oscillatory-cos"
SMOOTH = "smooth"
KINDS = (OSC_SIN, OSC_COS, SMOOTH)


def _segment(g: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    if a == 0.0:
        # z = v^2 regularizes integrable z^(-1/2) endpoint behaviour
        def h(v):
            return 2.0 * v * g(v * v)

        val, err, *_ = integrate.quad(h, 0.0, math.sqrt(b), epsabs=tol, epsrel=1e-13,
                                      limit=200, full_output=1)
    else:
        val, err, *_ = integrate.quad(g, a, b, epsabs=tol, epsrel=1e-13, limit=200, full_output=1)
    return val, err


def _averaged(partials: list[float], depth: int) -> float:
    # depth rounds of neighbour averaging = binomial-weighted mean of the last depth+1 sums
    s = np.asarray(partials[-(depth + 1):], dtype=float)
    for _ in range(depth):
        s = 0.5 * (s[1:] + s[:-1])
    return float(s[0])


def integrate_semi_infinite(f: Callable[[float], float], kind: str = SMOOTH,
                            tol: float = DEFAULT_TOL, max_panels: int = 20000,
                            scale: float = 1.0) -> float:
    """Integrate over ``(0, inf)``.

    ``kind`` selects the integrand:

    * ``"oscillatory-sin"``: ``f(z) sin(z) / z``
    * ``"oscillatory-cos"``: ``f(z) cos(z)``
    * ``"smooth"``: ``f(z)``

    Oscillatory kinds are split into half periods ``[k pi, (k+1) pi]``; the
    alternating partial sums are accelerated by iterated averaging until two
    successive accelerated values agree within ``tol``. The smooth kind grows
    the upper limit geometrically (starting from ``scale``) until the next
    segment and the integrand envelope fall below ``tol / 10``.

    Raises
    ------
    QuadratureError
        When ``max_panels`` is exhausted before reaching ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    panel_tol = tol / 50.0

    if kind == SMOOTH:
        total, _ = _segment(f, 0.0, scale, panel_tol)
        a = scale
        for _ in range(max_panels):
            b = 2.0 * a
            piece, _ = _segment(f, a, b, panel_tol)
            total += piece
            envelope = abs(f(b)) * b
            if abs(piece) < tol / 10.0 and envelope < tol / 10.0:
                return total
            a = b
        raise QuadratureError("smooth semi-infinite integral did not converge", total, abs(piece))

    if kind == OSC_SIN:
        def g(z):
            return f(z) * (math.sin(z) / z if z != 0.0 else 1.0)
    else:
        def g(z):
            return f(z) * math.cos(z)

    partials: list[float] = []
    accel: list[float] = []
    running = 0.0
    depth_max = 16
    for k in range(max_panels):
        piece, _ = _segment(g, k * math.pi, (k + 1) * math.pi, panel_tol)
        running += piece
        partials.append(running)
        if k < 4:
            continue
        depth = min(depth_max, len(partials) - 1)
        accel.append(_averaged(partials, depth))
        if len(accel) >= 3:
            d1 = abs(accel[-1] - accel[-2])
            d2 = abs(accel[-1] - accel[-3])
            if max(d1, d2) < tol:
                return accel[-1]
    best = accel[-1] if accel else running
    err = abs(accel[-1] - accel[-2]) if len(accel) > 1 else math.inf
    raise QuadratureError(f"{kind} integral did not converge within {max_panels} panels", best, err)
