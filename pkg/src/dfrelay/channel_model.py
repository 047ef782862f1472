"""Reversible-binding diffusion channel.

A point transmitter releases molecules at distance ``d`` from the centre of
a spherical receiver of radius ``r`` whose surface binds ligands at rate
``k_on`` (um/s) and releases complexes at rate ``k_off`` (1/s). The
frequency-domain transform ``U(w)`` gives the cumulative binding response
``psi(t)`` through three semi-infinite integrals, and ``psi`` sampled on the
bit grid gives the Poisson/Skellam statistics of the per-slot count.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .numerics import (
    DEFAULT_TOL,
    OSC_COS,
    OSC_SIN,
    SMOOTH,
    QuadratureError,
    SkellamDist,
    integrate_semi_infinite,
)

logger = logging.getLogger(__name__)

KERNEL_FLUX = "flux"
KERNEL_U = "u-transform"
KERNELS = (KERNEL_FLUX, KERNEL_U)


class ChannelModelError(ValueError):
    pass


@dataclass(frozen=True)
class ReceiverKinetics:
    """Spherical receiver: radius (um), association k_on (um/s), dissociation k_off (1/s)."""

    radius: float
    k_on: float
    k_off: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ChannelModelError(f"receiver radius must be > 0, got {self.radius}")
        if not self.k_on >= 0:
            raise ChannelModelError(f"k_on must be >= 0, got {self.k_on}")
        if not self.k_off >= 0:
            raise ChannelModelError(f"k_off must be >= 0, got {self.k_off}")

    @property
    def area(self) -> float:
        return 4.0 * math.pi * self.radius ** 2


@dataclass(frozen=True)
class HopChannel:
    """One transmitter -> receiver hop; ``distance`` is measured to the receiver centre."""

    diffusion: float
    distance: float
    receiver: ReceiverKinetics

    def __post_init__(self):
        if not self.diffusion > 0:
            raise ChannelModelError(f"diffusion coefficient must be > 0, got {self.diffusion}")
        if not self.distance > self.receiver.radius:
            raise ChannelModelError(
                f"transmitter at distance {self.distance} um lies inside the receiver "
                f"(radius {self.receiver.radius} um)")


@dataclass(frozen=True)
class SlotContext:
    bits: tuple[int, ...]
    emission: float
    slot_index: int
    bit_interval: float

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if not self.bits:
            raise ChannelModelError("bit sequence must be nonempty")
        if any(b not in (0, 1) for b in self.bits):
            raise ChannelModelError(f"bits must be 0/1, got {self.bits}")
        if not 1 <= self.slot_index <= len(self.bits):
            raise ChannelModelError(
                f"slot_index {self.slot_index} outside 1..{len(self.bits)}")
        if self.emission < 0:
            raise ChannelModelError("emission must be >= 0")
        if not self.bit_interval > 0:
            raise ChannelModelError("bit_interval must be > 0")


def _kinetic_admittance(jw: complex, hop: HopChannel) -> complex:
    rec = hop.receiver
    if rec.k_on == 0.0:
        return 0j
    return rec.k_on * jw / (hop.diffusion * (jw + rec.k_off))


def u_transform(w: float, hop: HopChannel) -> complex:
    """Frequency-domain transform ``U(w)`` of the reversible receiver.

    ``(1/(4 pi d D)) * (1 - q / (1/r + k_on jw / (D (jw + k_off)) + q)) * exp(-(d - r) q)``
    with ``q = sqrt(jw / D)`` on the principal branch.
    """
    if not w > 0:
        raise ChannelModelError(f"u_transform requires w > 0, got {w}")
    D, d, r = hop.diffusion, hop.distance, hop.receiver.radius
    jw = 1j * w
    q = cmath.sqrt(jw / D)
    denom = 1.0 / r + _kinetic_admittance(jw, hop) + q
    return (1.0 - q / denom) * cmath.exp(-(d - r) * q) / (4.0 * math.pi * d * D)


def u_transform_flux(w: float, hop: HopChannel) -> complex:
    """Transform whose cumulative inverse is the bound fraction.

    Same as :func:`u_transform` with the contact term ``1/r`` dropped from
    the numerator, ``(1 - (q + 1/r) / (...))``; it vanishes for ``k_on = 0``
    and coincides with :func:`u_transform` as ``k_on -> inf``.
    """
    if not w > 0:
        raise ChannelModelError(f"u_transform_flux requires w > 0, got {w}")
    D, d, r = hop.diffusion, hop.distance, hop.receiver.radius
    jw = 1j * w
    q = cmath.sqrt(jw / D)
    kin = _kinetic_admittance(jw, hop)
    return kin / (1.0 / r + kin + q) * cmath.exp(-(d - r) * q) / (4.0 * math.pi * d * D)


_TRANSFORMS = {KERNEL_FLUX: u_transform_flux, KERNEL_U: u_transform}


def _transform(kernel: str):
    try:
        return _TRANSFORMS[kernel]
    except KeyError:
        raise ChannelModelError(f"unknown kernel {kernel!r}; expected one of {KERNELS}") from None


@lru_cache(maxsize=None)
def _static_integral(hop: HopChannel, tol: float, kernel: str) -> float:
    # t-independent term: int_0^inf Im[U(w)] / w dw
    U = _transform(kernel)
    # scale of the exponential decay in w
    scale = 2.0 * hop.diffusion / max(hop.distance - hop.receiver.radius, 1e-3) ** 2
    return integrate_semi_infinite(lambda w: U(w, hop).imag / w, SMOOTH, tol, scale=scale)


@lru_cache(maxsize=4096)
def _binding_response(t: float, hop: HopChannel, tol: float, kernel: str) -> float:
    U = _transform(kernel)
    pref = 4.0 * hop.receiver.radius * hop.diffusion
    itol = tol / (3.0 * pref)
    try:
        i_sin = integrate_semi_infinite(lambda z: U(z / t, hop).real, OSC_SIN, itol)
        i_cos = integrate_semi_infinite(lambda z: U(z / t, hop).imag / z, OSC_COS, itol)
        i_static = _static_integral(hop, itol, kernel)
    except QuadratureError as exc:
        raise QuadratureError(f"binding_response(t={t}, hop={hop}): {exc}",
                              exc.estimate, exc.error) from exc
    return pref * (i_sin + i_cos - i_static)


def _quantize(t: float) -> float:
    return float(f"{t:.12g}")


def binding_response(t: float, hop: HopChannel, tol: float = DEFAULT_TOL,
                     kernel: str = KERNEL_FLUX) -> float:
    """Cumulative binding response ``psi(t)``.

    ``4 r D (int sin z/z Re[U(z/t)] dz + int cos z/z Im[U(z/t)] dz - int Im[U(w)]/w dw)``,
    i.e. the expected fraction of molecules released at ``t = 0`` that are
    bound to the receiver at time ``t``.

    Parameters
    ----------
    t : float
        Time since release (s), > 0.
    hop : HopChannel
    tol : float
        Absolute tolerance on ``psi``.
    kernel : {"flux", "u-transform"}
        Transform fed to the integrals. ``"flux"`` (default) uses
        :func:`u_transform_flux`, the bound-fraction transform; ``"u-transform"``
        uses :func:`u_transform` as written, which additionally carries the
        surface contact term ``4 pi r D * int C(r) dt`` and so reports binding
        even for ``k_on = 0``.

    Notes
    -----
    Values are memoized per ``(hop, t, tol, kernel)``. Excursions outside
    ``[0, 1]`` are clamped: silently within ``tol``, with a logged warning
    up to ``10 * tol``, and beyond that :class:`ChannelModelError` is raised.
    """
    if not t > 0:
        raise ChannelModelError(f"binding_response requires t > 0, got {t}")
    if not tol > 0:
        raise ChannelModelError("tol must be > 0")
    psi = _binding_response(_quantize(t), hop, float(tol), kernel)
    if psi < 0.0:
        if psi < -10.0 * tol:
            raise ChannelModelError(f"psi(t={t}) = {psi:.3e} is negative beyond tolerance for {hop}")
        if psi < -tol:
            logger.warning("clamping psi(t=%g) = %.3e to 0", t, psi)
        psi = 0.0
    elif psi > 1.0:
        if psi > 1.0 + 10.0 * tol:
            raise ChannelModelError(f"psi(t={t}) = {psi:.6f} exceeds 1 for {hop}")
        if psi > 1.0 + tol:
            logger.warning("clamping psi(t=%g) = %.12f to 1", t, psi)
        psi = 1.0
    return psi


def clear_cache() -> None:
    _binding_response.cache_clear()
    _static_integral.cache_clear()


def mean_bound_pair(ctx: SlotContext, hop: HopChannel, tol: float = DEFAULT_TOL,
                    kernel: str = KERNEL_FLUX) -> tuple[float, float]:
    """Poisson means of the cumulative bound count at the end and start of slot ``n``.

    ``lambda1 = sum_{i<=n} N x[i] psi((n-i+1) T_b)`` and
    ``lambda2 = sum_{i<=n-1} N x[i] psi((n-i) T_b)``. The relay -> destination
    hop uses the same function with the relay's bit sequence and slot ``n+1``.
    """
    n = ctx.slot_index
    lam1 = 0.0
    lam2 = 0.0
    for i in range(1, n + 1):
        if not ctx.bits[i - 1] or ctx.emission == 0:
            continue
        lam1 += ctx.emission * binding_response((n - i + 1) * ctx.bit_interval, hop, tol, kernel)
        if i <= n - 1:
            lam2 += ctx.emission * binding_response((n - i) * ctx.bit_interval, hop, tol, kernel)
    return lam1, lam2


def slot_count_distribution(ctx: SlotContext, hop: HopChannel, tol: float = DEFAULT_TOL,
                            kernel: str = KERNEL_FLUX) -> SkellamDist:
    """Skellam law of the net change in bound count over slot ``n``."""
    return SkellamDist(*mean_bound_pair(ctx, hop, tol, kernel))


def psi_samples(hop: HopChannel, times: Sequence[float], tol: float = DEFAULT_TOL,
                kernel: str = KERNEL_FLUX) -> list[float]:
    return [binding_response(t, hop, tol, kernel) for t in times]


def absorbing_sphere_fraction(t: float, hop: HopChannel) -> float:
    """Fraction absorbed by time ``t`` by a perfectly absorbing sphere: ``(r/d) erfc((d-r)/(2 sqrt(D t)))``."""
    r, d, D = hop.receiver.radius, hop.distance, hop.diffusion
    return r / d * math.erfc((d - r) / (2.0 * math.sqrt(D * t)))
