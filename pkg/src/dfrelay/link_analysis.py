"""Threshold detection and end-to-end error analysis of the two-hop DF link."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .channel_model import (
    KERNELS,
    ChannelModelError,
    HopChannel,
    ReceiverKinetics,
    SlotContext,
    slot_count_distribution,
)
from .numerics import DEFAULT_TOL, SkellamDist, skellam_cdf, skellam_pmf, skellam_sf

FIRST = "first"
SECOND = "second"
RELAY_FIXED = "fixed"
RELAY_STRICT = "strict"


class LinkConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LinkConfig:
    """Two-hop source -> relay -> destination configuration.

    Nodes are collinear: S at the origin, R at ``d_sr`` and D at ``d_sd``.
    Lengths in um, rates in um/s (``kon_*``) and 1/s (``koff_*``), times in s.
    ``prefix`` holds the bits sent before the evaluated slot ``n = len(prefix) + 1``.
    """

    d_sd: float = 30.0
    d_sr: float = 15.0
    r_r: float = 5.0
    r_d: float = 5.0
    diffusion: float = 79.4
    kon_r: float = 1e4
    koff_r: float = 100.0
    kon_d: float = 1e4
    koff_d: float = 100.0
    bit_interval: float = 0.7
    n_a: float = 1000.0
    n_b: float = 1000.0
    p0: float = 0.5
    prefix: tuple[int, ...] = (1, 1)
    tau_r: int | None = None
    tau_d: int | None = None
    budget: float | None = None
    kernel: str = "flux"
    tol: float = DEFAULT_TOL
    relay_history: str = RELAY_FIXED

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(b) for b in self.prefix))
        if any(b not in (0, 1) for b in self.prefix):
            raise LinkConfigError(f"prefix must contain only 0/1, got {self.prefix}")
        if not 0 < self.d_sr < self.d_sd:
            raise LinkConfigError(f"need 0 < d_sr < d_sd, got d_sr={self.d_sr}, d_sd={self.d_sd}")
        if self.d_sr <= self.r_r:
            raise LinkConfigError(
                f"source at {self.d_sr} um from the relay centre lies inside the relay "
                f"sphere (r_r={self.r_r})")
        if self.d_rd <= self.r_d:
            raise LinkConfigError(
                f"relay centre at {self.d_rd} um from the destination lies inside the "
                f"destination sphere (r_d={self.r_d})")
        if self.d_sd <= self.r_d:
            raise LinkConfigError("source lies inside the destination sphere")
        if not 0.0 <= self.p0 <= 1.0:
            raise LinkConfigError(f"p0 must lie in [0, 1], got {self.p0}")
        if self.n_a < 0 or self.n_b < 0:
            raise LinkConfigError("molecule counts must be >= 0")
        if self.budget is not None and not math.isclose(self.n_a + self.n_b, self.budget):
            raise LinkConfigError(
                f"n_a + n_b = {self.n_a + self.n_b} does not match budget {self.budget}")
        if self.kernel not in KERNELS:
            raise LinkConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.relay_history not in (RELAY_FIXED, RELAY_STRICT):
            raise LinkConfigError(f"relay_history must be 'fixed' or 'strict', got {self.relay_history!r}")
        if not self.bit_interval > 0:
            raise LinkConfigError("bit_interval must be > 0")
        # kinetics validated by ReceiverKinetics
        try:
            self.hop_sr, self.hop_rd  # noqa: B018
        except ChannelModelError as exc:
            raise LinkConfigError(str(exc)) from exc

    @property
    def p1(self) -> float:
        return 1.0 - self.p0

    @property
    def d_rd(self) -> float:
        return self.d_sd - self.d_sr

    @property
    def eval_slot(self) -> int:
        return len(self.prefix) + 1

    @property
    def relay_receiver(self) -> ReceiverKinetics:
        return ReceiverKinetics(self.r_r, self.kon_r, self.koff_r)

    @property
    def dest_receiver(self) -> ReceiverKinetics:
        return ReceiverKinetics(self.r_d, self.kon_d, self.koff_d)

    @property
    def hop_sr(self) -> HopChannel:
        return HopChannel(self.diffusion, self.d_sr, self.relay_receiver)

    @property
    def hop_rd(self) -> HopChannel:
        return HopChannel(self.diffusion, self.d_rd, self.dest_receiver)

    @property
    def hop_sd(self) -> HopChannel:
        return HopChannel(self.diffusion, self.d_sd, self.dest_receiver)

    def replace(self, **changes) -> "LinkConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ErrorBreakdown:
    """Conditional detection probabilities of both hops and the end-to-end error.

    ``p_s1r0`` reads "source sent 1, relay decided 0"; ``p_r1d0`` reads
    "relay sent 1, destination decided 0".
    """

    p_s1r0: float
    p_s0r1: float
    p_s1r1: float
    p_s0r0: float
    p_r1d0: float
    p_r0d1: float
    p_r1d1: float
    p_r0d0: float
    pe: float
    tau_r: int | None = None
    tau_d: int | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def detect(count: int, tau: int) -> int:
    """Threshold decision: 1 when ``count >= tau``."""
    return 1 if count >= tau else 0


# ---------------------------------------------------------------------------
# Slot statistics per hop
# ---------------------------------------------------------------------------

def first_hop_dists(config: LinkConfig) -> tuple[SkellamDist, SkellamDist]:
    """Skellam laws at the relay in slot ``n`` given source bit 1 and 0."""
    n = config.eval_slot
    out = []
    for b in (1, 0):
        ctx = SlotContext(config.prefix + (b,), config.n_a, n, config.bit_interval)
        out.append(slot_count_distribution(ctx, config.hop_sr, config.tol, config.kernel))
    return out[0], out[1]


def second_hop_dists(config: LinkConfig, relay_prefix: Sequence[int] | None = None
                     ) -> tuple[SkellamDist, SkellamDist]:
    """Skellam laws at the destination in slot ``n+1`` given relay bit 1 and 0.

    The relay is silent in slot 1 and forwards its slot-``k`` decision in slot
    ``k+1``; by default its earlier decisions are the source prefix.
    """
    if relay_prefix is None:
        relay_prefix = config.prefix
    n = config.eval_slot
    out = []
    for b in (1, 0):
        bits = (0,) + tuple(relay_prefix) + (b,)
        ctx = SlotContext(bits, config.n_b, n + 1, config.bit_interval)
        out.append(slot_count_distribution(ctx, config.hop_rd, config.tol, config.kernel))
    return out[0], out[1]


def relay_prefix_dists(config: LinkConfig) -> list[SkellamDist]:
    """Relay slot-count laws for the prefix slots ``1 .. n-1``."""
    out = []
    for k in range(1, config.eval_slot):
        ctx = SlotContext(config.prefix[:k], config.n_a, k, config.bit_interval)
        out.append(slot_count_distribution(ctx, config.hop_sr, config.tol, config.kernel))
    return out


def _detection_tables(d1: SkellamDist, d0: SkellamDist, taus):
    # rows: (miss, hit) under bit 1 and (reject, false alarm) under bit 0
    miss = skellam_cdf(taus - 1, d1)
    hit = skellam_sf(taus - 1, d1)
    rej = skellam_cdf(taus - 1, d0)
    fa = skellam_sf(taus - 1, d0)
    return miss, hit, rej, fa


def _history_weights(config: LinkConfig, taus_r) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Probability of each relay prefix-decoding history as a function of tau_R."""
    dists = relay_prefix_dists(config)
    histories = list(itertools.product((0, 1), repeat=len(dists)))
    p_one = [skellam_sf(taus_r - 1, d) for d in dists]
    weights = np.ones((len(histories), len(taus_r)))
    for h_idx, h in enumerate(histories):
        for k, bit in enumerate(h):
            weights[h_idx] *= p_one[k] if bit else 1.0 - p_one[k]
    return histories, weights


def _second_hop_tables(config: LinkConfig, taus_r, taus_d):
    """Second-hop tables shaped ``(len(taus_r), len(taus_d))``."""
    taus_r = np.asarray(taus_r)
    taus_d = np.asarray(taus_d)
    if config.relay_history == RELAY_FIXED or config.eval_slot == 1:
        tabs = _detection_tables(*second_hop_dists(config), taus_d)
        return tuple(np.broadcast_to(t, (len(taus_r), len(taus_d))) for t in tabs)
    histories, weights = _history_weights(config, taus_r)
    acc = [np.zeros((len(taus_r), len(taus_d))) for _ in range(4)]
    for h, w in zip(histories, weights):
        tabs = _detection_tables(*second_hop_dists(config, h), taus_d)
        for a, t in zip(acc, tabs):
            a += np.outer(w, t)
    return tuple(acc)


def hop_error_probs(config: LinkConfig, hop: str = FIRST, tau: int | None = None
                    ) -> tuple[float, float]:
    """``(miss, false_alarm)`` of one hop at threshold ``tau``.

    ``miss = P(N < tau | bit 1)``, ``false_alarm = P(N >= tau | bit 0)``. The
    threshold defaults to the config's ``tau_r`` / ``tau_d`` (optimized when
    unset). The second hop is evaluated in slot ``n+1``.
    """
    if hop not in (FIRST, SECOND):
        raise ValueError(f"hop must be 'first' or 'second', got {hop!r}")
    needs_pair = tau is None or (hop == SECOND and config.relay_history == RELAY_STRICT)
    tau_r, tau_d = _resolved_thresholds(config) if needs_pair else (tau, tau)
    if tau is not None:
        tau_r, tau_d = (tau, tau_d) if hop == FIRST else (tau_r, tau)
    if hop == FIRST:
        miss, _, _, fa = _detection_tables(*first_hop_dists(config), np.array([tau_r]))
    else:
        miss, _, _, fa = _second_hop_tables(config, [tau_r], [tau_d])
    return float(np.ravel(miss)[0]), float(np.ravel(fa)[0])


# ---------------------------------------------------------------------------
# Two-hop error probability and threshold search
# ---------------------------------------------------------------------------

def default_tau_range(config: LinkConfig) -> tuple[int, int]:
    """Integer threshold range covering both hops' bit-0 and bit-1 laws.

    From ``min(0, lowest mean)`` up to ``ceil(largest lambda1 + 5 sigma) + 1``.
    """
    dists = list(first_hop_dists(config)) + list(second_hop_dists(config))
    if config.relay_history == RELAY_STRICT:
        for h in itertools.product((0, 1), repeat=config.eval_slot - 1):
            dists.extend(second_hop_dists(config, h))
    lo = min(0, min(math.floor(d.mean) for d in dists))
    hi = max(math.ceil(d.lambda1 + 5.0 * math.sqrt(d.var)) for d in dists) + 1
    return lo, hi


def chain_rule_error(p1, s1r1, s1r0, s0r0, s0r1, r1d0, r0d0, r0d1, r1d1):
    """``P1 (s1r1 r1d0 + s1r0 r0d0) + P0 (s0r0 r0d1 + s0r1 r1d1)``; broadcasts over arrays."""
    p0 = 1.0 - p1
    return p1 * (s1r1 * r1d0 + s1r0 * r0d0) + p0 * (s0r0 * r0d1 + s0r1 * r1d1)


def _pe_grid(config: LinkConfig, taus_r, taus_d):
    taus_r = np.asarray(taus_r)
    taus_d = np.asarray(taus_d)
    s1r0, s1r1, s0r0, s0r1 = _detection_tables(*first_hop_dists(config), taus_r)
    r1d0, r1d1, r0d0, r0d1 = _second_hop_tables(config, taus_r, taus_d)
    pe = chain_rule_error(config.p1, s1r1[:, None], s1r0[:, None], s0r0[:, None], s0r1[:, None],
                          r1d0, r0d0, r0d1, r1d1)
    parts = dict(s1r0=s1r0, s1r1=s1r1, s0r0=s0r0, s0r1=s0r1,
                 r1d0=r1d0, r1d1=r1d1, r0d0=r0d0, r0d1=r0d1)
    return pe, parts


def optimize_thresholds(config: LinkConfig, tau_range: tuple[int, int] | None = None
                        ) -> tuple[int, int, float]:
    """Exhaustive search of ``(tau_R, tau_D)`` over ``tau_range`` squared (inclusive).

    Ties resolve to the lexicographically smallest pair.
    """
    lo, hi = tau_range if tau_range is not None else default_tau_range(config)
    if hi < lo:
        raise ValueError(f"empty threshold range [{lo}, {hi}]")
    taus = np.arange(lo, hi + 1)
    pe, _ = _pe_grid(config, taus, taus)
    # argmin returns the first minimum in row-major order
    i, j = np.unravel_index(int(np.argmin(pe)), pe.shape)
    return int(taus[i]), int(taus[j]), float(pe[i, j])


def _resolved_thresholds(config: LinkConfig) -> tuple[int, int]:
    if config.tau_r is not None and config.tau_d is not None:
        return int(config.tau_r), int(config.tau_d)
    tr, td, _ = optimize_thresholds(config)
    return (int(config.tau_r) if config.tau_r is not None else tr,
            int(config.tau_d) if config.tau_d is not None else td)


def with_optimal_thresholds(config: LinkConfig) -> LinkConfig:
    tr, td, _ = optimize_thresholds(config)
    return config.replace(tau_r=tr, tau_d=td)


def two_hop_error(config: LinkConfig) -> ErrorBreakdown:
    """End-to-end error via the chain rule over the relay decision.

    ``pe = P1 (p_s1r1 p_r1d0 + p_s1r0 p_r0d0) + P0 (p_s0r0 p_r0d1 + p_s0r1 p_r1d1)``.
    Unset thresholds are optimized first.
    """
    tau_r, tau_d = _resolved_thresholds(config)
    pe, parts = _pe_grid(config, [tau_r], [tau_d])
    v = {k: float(np.ravel(a)[0]) for k, a in parts.items()}
    return ErrorBreakdown(
        p_s1r0=v["s1r0"], p_s0r1=v["s0r1"], p_s1r1=v["s1r1"], p_s0r0=v["s0r0"],
        p_r1d0=v["r1d0"], p_r0d1=v["r0d1"], p_r1d1=v["r1d1"], p_r0d0=v["r0d0"],
        pe=float(pe[0, 0]), tau_r=tau_r, tau_d=tau_d)


def two_hop_error_equal_priors(config: LinkConfig) -> float:
    """Equal-prior error from explicit PMF sums (independent of the CDF path).

    ``2 Pe = [L0(R) U0(D) + U0(R) U1(D)] + [U1(R) L1(D) + L1(R) L0(D)]`` where
    ``L`` sums the PMF below the threshold and ``U`` from the threshold up.
    Only defined for the fixed relay-prefix mode.
    """
    if config.relay_history != RELAY_FIXED:
        raise ValueError("equal-prior closed form assumes relay_history='fixed'")
    tau_r, tau_d = _resolved_thresholds(config)

    def split(dist: SkellamDist, tau: int) -> tuple[float, float]:
        lo, hi = dist.support_window()
        ms = np.arange(lo, hi + 1)
        p = skellam_pmf(ms, dist)
        return float(np.sum(p[ms < tau])), float(np.sum(p[ms >= tau]))

    r1, r0 = first_hop_dists(config)
    d1, d0 = second_hop_dists(config)
    l0r, u0r = split(r0, tau_r)
    l1r, u1r = split(r1, tau_r)
    l0d, u0d = split(d0, tau_d)
    l1d, u1d = split(d1, tau_d)
    two_pe = (l0r * u0d + u0r * u1d) + (u1r * l1d + l1r * l0d)
    return 0.5 * two_pe


def relay_prior(config: LinkConfig) -> float:
    """``P(x_r = 0) = P0 (1 - false_alarm) + P1 miss`` for the first hop."""
    miss, fa = hop_error_probs(config, FIRST)
    return config.p0 * (1.0 - fa) + config.p1 * miss


def direct_threshold(config: LinkConfig, n_direct: float,
                     tau_range: tuple[int, int] | None = None) -> tuple[int, float]:
    """Best single-hop threshold and error for S -> D with ``n_direct`` molecules."""
    n = config.eval_slot
    hop = config.hop_sd
    d1, d0 = (slot_count_distribution(SlotContext(config.prefix + (b,), n_direct, n,
                                                  config.bit_interval), hop, config.tol, config.kernel)
              for b in (1, 0))
    if tau_range is None:
        lo = min(0, math.floor(min(d1.mean, d0.mean)))
        hi = max(math.ceil(d.lambda1 + 5.0 * math.sqrt(d.var)) for d in (d1, d0)) + 1
    else:
        lo, hi = tau_range
    taus = np.arange(lo, hi + 1)
    miss, _, _, fa = _detection_tables(d1, d0, taus)
    pe = config.p1 * miss + config.p0 * fa
    i = int(np.argmin(pe))
    return int(taus[i]), float(pe[i])


def direct_error(config: LinkConfig, n_direct: float) -> float:
    """Optimal-threshold error of direct S -> D transmission (destination kinetics, distance d_sd)."""
    return direct_threshold(config, n_direct)[1]


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("DFRELAY_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn: Callable, items: Iterable, workers: int | None = None) -> list:
    """Ordered map, optionally over a thread pool; output order never depends on scheduling."""
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


class PositionPoint(NamedTuple):
    ratio: float
    tau_r: int
    tau_d: int
    pe: float


class AllocationPoint(NamedTuple):
    n_a: float
    n_b: float
    tau_r: int
    tau_d: int
    pe: float


class KineticsPoint(NamedTuple):
    k_on: float
    k_off: float
    tau_r: int
    tau_d: int
    pe: float


def sweep_relay_position(config: LinkConfig, ratios: Sequence[float],
                         workers: int | None = None) -> list[PositionPoint]:
    """Re-optimized error as the relay moves along S-D (``d_sr = ratio * d_sd``)."""
    lo = config.r_r / config.d_sd
    hi = 1.0 - config.r_d / config.d_sd
    for x in ratios:
        if not lo < x < hi:
            raise LinkConfigError(f"ratio {x} outside ({lo:.4g}, {hi:.4g}): a node would sit inside a receiver")

    def point(x):
        cfg = config.replace(d_sr=x * config.d_sd, tau_r=None, tau_d=None)
        return PositionPoint(float(x), *optimize_thresholds(cfg))

    return pmap(point, ratios, workers)


def sweep_allocation(config: LinkConfig, budget: float, n_a_values: Sequence[float],
                     workers: int | None = None) -> list[AllocationPoint]:
    """Re-optimized error as a fixed molecule budget is split between S and R."""
    for n_a in n_a_values:
        if not 0 <= n_a <= budget:
            raise LinkConfigError(f"N_A={n_a} outside [0, budget={budget}]")

    def point(n_a):
        cfg = config.replace(n_a=float(n_a), n_b=float(budget - n_a), budget=float(budget),
                             tau_r=None, tau_d=None)
        return AllocationPoint(float(n_a), float(budget - n_a), *optimize_thresholds(cfg))

    return pmap(point, n_a_values, workers)


def sweep_kinetics(config: LinkConfig, k_on_values: Sequence[float], k_off_values: Sequence[float],
                   workers: int | None = None) -> list[KineticsPoint]:
    """Re-optimized error over a k_on x k_off grid applied to both receivers."""
    grid = [(kon, koff) for kon in k_on_values for koff in k_off_values]

    def point(kk):
        kon, koff = kk
        cfg = config.replace(kon_r=kon, koff_r=koff, kon_d=kon, koff_d=koff, tau_r=None, tau_d=None)
        return KineticsPoint(float(kon), float(koff), *optimize_thresholds(cfg))

    return pmap(point, grid, workers)
