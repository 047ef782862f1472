"""Brownian-dynamics Monte Carlo of the two-hop link.

Geometry is collinear: S at the origin, R centred at ``d_sr`` and D at
``d_sd`` on the x axis. Species A (source -> relay) binds only at R and
species B (relay -> destination) only at D. Positions of each species are
stored relative to the centre of the sphere that binds it.

Two BER engines are available:

``"particles"``
    Every snapshot simulates every released molecule.
``"pattern"`` (default)
    Molecules never interact, so a snapshot only needs the number of
    molecules of each release whose bound/free states at the slot boundaries
    follow each of the ``2**K`` possible patterns. A reference ensemble of
    ``reference_molecules`` molecules per hop gives those pattern
    probabilities once; each snapshot then draws the pattern counts of each
    release from a multinomial. This reproduces the joint law of all slot
    boundary counts (including the correlation between consecutive
    cumulative counts) at a fraction of the cost.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from ..channel_model import HopChannel
from ..link_analysis import (
    ErrorBreakdown,
    LinkConfig,
    _resolved_thresholds,
    default_workers,
    pmap,
)
from . import kernels
from .desorption import balanced_desorption

logger = logging.getLogger(__name__)

RULE_ROBIN = "robin-bridge"
RULE_ERBAN_CHAPMAN = "erban-chapman"
PLACE_BALANCED = "balanced"
PLACE_HALF_GAUSSIAN = "half-gaussian"
PLACE_FIXED = "fixed"
ENGINE_PATTERN = "pattern"
ENGINE_PARTICLES = "particles"

_RULE_CODES = {RULE_ROBIN: kernels.RULE_ROBIN, RULE_ERBAN_CHAPMAN: kernels.RULE_ERBAN_CHAPMAN}
_PLACE_CODES = {PLACE_BALANCED: kernels.PLACE_BALANCED,
                PLACE_HALF_GAUSSIAN: kernels.PLACE_HALF_GAUSSIAN, PLACE_FIXED: kernels.PLACE_FIXED}

# spawn keys of the independent random streams derived from SimConfig.seed
_STREAM_SNAPSHOT = 0
_STREAM_POOL_A = 1
_STREAM_POOL_B = 2
_STREAM_PSI = 3


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo controls.

    ``desorb_placement="balanced"`` releases complexes in detailed balance
    with the binding rule (see :mod:`.desorption`); ``"half-gaussian"`` and
    ``"fixed"`` place released molecules at a drawn or fixed offset.
    ``desorb_offset`` is the release distance used by ``desorb_placement="fixed"``
    (default ``sqrt(pi D dt)``, the mean half-Gaussian offset). With
    ``opaque_bodies`` the destination sphere reflects species A; species B
    is released at the relay centre and always passes through the relay.
    """

    link: LinkConfig = field(default_factory=LinkConfig)
    dt: float = 0.002
    snapshots: int = 10_000
    seed: int = 20240607
    boundary_rule: str = RULE_ROBIN
    desorb_placement: str = PLACE_BALANCED
    desorb_offset: float | None = None
    opaque_bodies: bool = False
    engine: str = ENGINE_PATTERN
    reference_molecules: int = 200_000
    workers: int | None = None
    debug: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise SimConfigError(f"dt must be > 0, got {self.dt}")
        if self.dt > self.link.bit_interval:
            raise SimConfigError("dt must not exceed the bit interval")
        if int(self.snapshots) != self.snapshots or self.snapshots < 1:
            raise SimConfigError(f"snapshots must be a positive integer, got {self.snapshots}")
        if self.boundary_rule not in _RULE_CODES:
            raise SimConfigError(f"boundary_rule must be one of {tuple(_RULE_CODES)}")
        if self.desorb_placement not in _PLACE_CODES:
            raise SimConfigError(f"desorb_placement must be one of {tuple(_PLACE_CODES)}")
        if self.desorb_offset is not None and not self.desorb_offset > 0:
            raise SimConfigError("desorb_offset must be > 0")
        if self.engine not in (ENGINE_PATTERN, ENGINE_PARTICLES):
            raise SimConfigError(f"engine must be 'pattern' or 'particles', got {self.engine!r}")
        if self.reference_molecules < 1000:
            raise SimConfigError("reference_molecules must be >= 1000")
        if int(self.seed) != self.seed or self.seed < 0:
            raise SimConfigError("seed must be a non-negative integer")
        for name in ("n_a", "n_b"):
            v = getattr(self.link, name)
            if v != int(v):
                raise SimConfigError(f"simulation needs an integer molecule count, got {name}={v}")

    @property
    def steps_per_slot(self) -> int:
        k = self.link.bit_interval / self.dt
        if not math.isclose(k, round(k), rel_tol=1e-9):
            raise SimConfigError(f"bit interval {self.link.bit_interval} is not a multiple of dt {self.dt}")
        return int(round(k))

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# Elementary operations (reference implementations; the kernels fuse them)
# ---------------------------------------------------------------------------

def brownian_step(positions, dt: float, D: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian displacement with per-axis standard deviation ``sqrt(2 D dt)``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if D < 0:
        raise ValueError("D must be >= 0")
    positions = np.asarray(positions, dtype=float)
    return positions + math.sqrt(2.0 * D * dt) * rng.standard_normal(positions.shape)


def erban_chapman_probability(k_on: float, dt: float, D: float) -> float:
    """Per-contact association probability ``k_on sqrt(pi dt / D)``, capped at 1."""
    p = k_on * math.sqrt(math.pi * dt / D)
    if p > 1.0:
        warnings.warn(
            f"association probability k_on*sqrt(pi*dt/D) = {p:.3g} exceeds 1 and is capped; "
            "the time step is too coarse for this rule", RuntimeWarning, stacklevel=2)
        return 1.0
    return p


def surface_interaction(proposed, radius: float, k_on: float, dt: float, D: float,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Resolve end-of-step contacts with a sphere centred at the origin.

    Points inside the sphere bind at their radial projection with the
    Erban-Chapman probability, the rest are mirrored about the surface.
    Returns ``(positions, bound)``.
    """
    pos = np.array(proposed, dtype=float, ndmin=2)
    r = np.linalg.norm(pos, axis=1)
    inside = r < radius
    p_on = erban_chapman_probability(k_on, dt, D) if k_on > 0 else 0.0
    bound = inside & (rng.random(len(pos)) < p_on)
    refl = inside & ~bound
    pos[bound] *= (radius / r[bound])[:, None]
    pos[refl] *= ((2.0 * radius - r[refl]) / r[refl])[:, None]
    return pos, bound


def dissociation_probability(k_off: float, dt: float) -> float:
    """Per-step release probability ``1 - exp(-k_off dt)``."""
    return -math.expm1(-k_off * dt)


def dissociation_step(positions, bound, radius: float, k_off: float, dt: float, D: float,
                      rng: np.random.Generator, placement: str = PLACE_HALF_GAUSSIAN,
                      offset: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Release bound molecules with probability ``1 - exp(-k_off dt)``.

    A released molecule moves along the outward normal to ``radius + |g|``
    with ``g ~ N(0, 2 D dt)`` (or ``radius + offset`` for ``placement="fixed"``).
    """
    pos = np.array(positions, dtype=float, ndmin=2)
    bound = np.array(bound, dtype=bool)
    p = dissociation_probability(k_off, dt)
    go = bound & (rng.random(len(pos)) < p)
    idx = np.flatnonzero(go)
    if placement == PLACE_HALF_GAUSSIAN:
        delta = np.abs(rng.standard_normal(idx.size)) * math.sqrt(2.0 * D * dt)
    elif placement == PLACE_FIXED:
        delta = np.full(idx.size, math.sqrt(math.pi * D * dt) if offset is None else offset)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    r = np.linalg.norm(pos[idx], axis=1)
    pos[idx] *= ((radius + delta) / r)[:, None]
    bound[idx] = False
    return pos, bound


# ---------------------------------------------------------------------------
# Species ensembles
# ---------------------------------------------------------------------------

class _Species:
    """Molecules of one species, in coordinates centred on their receiver."""

    def __init__(self, radius, k_on, k_off, D, sim: SimConfig, obstacles=()):
        self.radius = float(radius)
        self.k_on = float(k_on)
        self.D = float(D)
        self.dt = sim.dt
        self.sigma = math.sqrt(2.0 * D * sim.dt)
        self.rule = _RULE_CODES[sim.boundary_rule]
        self.placement = _PLACE_CODES[sim.desorb_placement]
        self.x_grid = self.cdf = None
        if self.placement == kernels.PLACE_BALANCED:
            table = balanced_desorption(self.radius, self.k_on, float(k_off), self.D, sim.dt, self.rule)
            self.p_unbind = table.p_release
            self.x_grid, self.cdf = table.x_grid, table.cdf
        else:
            self.p_unbind = dissociation_probability(k_off, sim.dt)
        self.offset = (sim.desorb_offset if sim.desorb_offset is not None
                       else math.sqrt(math.pi * D * sim.dt))
        self.obstacles = [(np.asarray(c, dtype=float), float(a)) for c, a in obstacles]
        self.debug = sim.debug
        self.pos = np.empty((0, 3))
        self.bound = np.zeros(0, dtype=bool)
        self.n_bound = 0
        if sim.boundary_rule == RULE_ERBAN_CHAPMAN and self.k_on > 0:
            erban_chapman_probability(self.k_on, sim.dt, self.D)  # warns when capped

    def release(self, n: int, point) -> None:
        if n <= 0:
            return
        new = np.tile(np.asarray(point, dtype=float), (n, 1))
        self.pos = np.concatenate([self.pos, new])
        self.bound = np.concatenate([self.bound, np.zeros(n, dtype=bool)])

    def step(self, rng: np.random.Generator) -> int:
        n = len(self.bound)
        if n == 0:
            return 0
        normals = rng.standard_normal((n, 3))
        u = rng.random((2, n))
        self.n_bound = kernels.step(self.pos, self.bound, normals, u[0], u[1], self.sigma,
                                    self.radius, self.D, self.dt, self.p_unbind, self.k_on,
                                    self.rule, self.placement, self.offset, self.x_grid, self.cdf)
        for centre, a in self.obstacles:
            _reflect_outside(self.pos, self.bound, centre, a)
        if self.debug:
            self.check()
        return self.n_bound

    def check(self) -> None:
        r = np.linalg.norm(self.pos, axis=1)
        free = ~self.bound
        if np.any(r[free] < self.radius * (1 - 1e-12)):
            raise AssertionError("free molecule strictly inside its receiver")
        if np.any(np.abs(r[self.bound] - self.radius) > 1e-9 * self.radius):
            raise AssertionError("bound molecule off the receiver surface")
        if int(np.count_nonzero(self.bound)) + int(np.count_nonzero(free)) != len(self.bound):
            raise AssertionError("molecule count not conserved")


def _reflect_outside(pos, bound, centre, radius) -> None:
    rel = pos - centre
    r = np.sqrt(rel[:, 0] * rel[:, 0] + rel[:, 1] * rel[:, 1] + rel[:, 2] * rel[:, 2])
    hit = (r < radius) & ~bound
    if np.any(hit):
        s = (2.0 * radius - r[hit]) / r[hit]
        pos[hit] = centre + rel[hit] * s[:, None]


def _stream(sim: SimConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(sim.seed), spawn_key=key))


# ---------------------------------------------------------------------------
# Single hop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HopTrace:
    """Bound-complex count sampled every ``dt`` (``times[0] = 0``) and per-slot net counts."""

    times: np.ndarray
    complex_count: np.ndarray
    slot_counts: np.ndarray


def _hop_species(hop: HopChannel, sim: SimConfig) -> _Species:
    rec = hop.receiver
    return _Species(rec.radius, rec.k_on, rec.k_off, hop.diffusion, sim)


def simulate_hop(hop: HopChannel, bits: Sequence[int], n_molecules: int, sim: SimConfig,
                 snapshot: int = 0) -> HopTrace:
    """One snapshot of a single hop: ``n_molecules`` released at each slot start with bit 1."""
    bits = [int(b) for b in bits]
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0/1, got {bits}")
    rng = _stream(sim, _STREAM_SNAPSHOT, int(snapshot))
    sp = _hop_species(hop, sim)
    k = sim.steps_per_slot
    counts = np.zeros(len(bits) * k + 1, dtype=np.int64)
    source = (-hop.distance, 0.0, 0.0)
    for slot, b in enumerate(bits):
        if b:
            sp.release(int(n_molecules), source)
        for s in range(1, k + 1):
            counts[slot * k + s] = sp.step(rng)
    times = np.arange(len(counts)) * sim.dt
    cumulative = counts[::k]
    return HopTrace(times, counts, np.diff(cumulative))


def _boundary_patterns(hop: HopChannel, n_boundaries: int, molecules: int, sim: SimConfig,
                       rng: np.random.Generator, obstacles=(), record_steps=None) -> np.ndarray:
    """Per-molecule bitmask of bound states at ages ``T_b, 2 T_b, ..``."""
    sp = _Species(hop.receiver.radius, hop.receiver.k_on, hop.receiver.k_off, hop.diffusion,
                  sim, obstacles)
    sp.release(molecules, (-hop.distance, 0.0, 0.0))
    if record_steps is None:
        record_steps = [(j + 1) * sim.steps_per_slot for j in range(n_boundaries)]
    codes = np.zeros(molecules, dtype=np.int64)
    targets = {s: j for j, s in enumerate(record_steps)}
    for s in range(1, max(record_steps, default=0) + 1):
        sp.step(rng)
        if s in targets:
            codes |= sp.bound.astype(np.int64) << targets[s]
    return codes


def estimate_psi_mc(hop: HopChannel, t_grid: Sequence[float], molecules: int = 100_000,
                    seed: int = 0, sim: SimConfig | None = None) -> list[tuple[float, float, float]]:
    """Bound fraction of one instantaneous release at each time in ``t_grid``.

    Returns ``(t, psi_hat, std_err)`` with the binomial standard error. Times
    are rounded to the nearest multiple of ``dt``; the stepping options come
    from ``sim`` (its seed is replaced by ``seed``).
    """
    if molecules < 1000:
        raise ValueError("estimate_psi_mc needs at least 1000 molecules")
    sim = replace(sim or SimConfig(), seed=int(seed))
    t_grid = [float(t) for t in t_grid]
    if any(t < 0 for t in t_grid):
        raise ValueError("times must be >= 0")
    steps = [int(round(t / sim.dt)) for t in t_grid]
    positive = sorted({s for s in steps if s > 0})
    codes = _boundary_patterns(hop, len(positive), molecules, sim, _stream(sim, _STREAM_PSI),
                               record_steps=positive)
    bit_of = {s: j for j, s in enumerate(positive)}
    out = []
    for t, s in zip(t_grid, steps):
        if s == 0:
            out.append((t, 0.0, 0.0))
            continue
        p = float(np.count_nonzero((codes >> bit_of[s]) & 1)) / molecules
        out.append((t, p, math.sqrt(p * (1.0 - p) / molecules)))
    return out


# ---------------------------------------------------------------------------
# Two-hop BER
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalBreakdown(ErrorBreakdown):
    """Empirical frequencies of the two-hop error events.

    ``relay_zero`` is the prior-weighted frequency of the relay forwarding 0.
    Conditional frequencies with an empty conditioning set are NaN.
    """

    relay_zero: float = float("nan")
    snapshots: int = 0
    ci95: tuple[float, float] = (float("nan"), float("nan"))


class BerEstimate(NamedTuple):
    pe: float
    ci95: tuple[float, float]
    breakdown: EmpiricalBreakdown


class _Outcome(NamedTuple):
    source_bit: int
    relay_bit: int
    dest_bit: int


def wilson_interval(p_hat: float, n: float, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval; ``n`` may be an effective (non-integer) sample size."""
    if n <= 0:
        return 0.0, 1.0
    z2 = z * z
    centre = (p_hat + z2 / (2 * n)) / (1 + z2 / n)
    half = z / (1 + z2 / n) * math.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n))
    lo = 0.0 if p_hat <= 0.0 else max(0.0, centre - half)
    hi = 1.0 if p_hat >= 1.0 else min(1.0, centre + half)
    return lo, hi


def _source_bits(sim: SimConfig) -> np.ndarray:
    """Evaluated source bit per snapshot; ones first, split by the prior."""
    n1 = int(round(sim.link.p1 * sim.snapshots))
    out = np.zeros(sim.snapshots, dtype=np.int8)
    out[:n1] = 1
    return out


def _cumulative_from_patterns(pattern_counts: dict[int, np.ndarray], ages_of) -> int:
    total = 0
    for release, counts in pattern_counts.items():
        age = ages_of(release)
        if age <= 0:
            continue
        mask = np.arange(len(counts)) >> (age - 1) & 1
        total += int(np.dot(counts, mask))
    return total


def pattern_slot_counts(hop: HopChannel, bits: Sequence[int], n_molecules: int, sim: SimConfig,
                        snapshots: int) -> np.ndarray:
    """Net slot counts of ``snapshots`` single-hop snapshots drawn with the pattern engine.

    Same law as :func:`simulate_hop` slot counts; shape ``(snapshots, len(bits))``.
    """
    bits = [int(b) for b in bits]
    n = len(bits)
    codes = _boundary_patterns(hop, n, sim.reference_molecules, sim, _stream(sim, _STREAM_POOL_A))
    p = np.bincount(codes, minlength=2 ** n) / sim.reference_molecules
    out = np.zeros((snapshots, n), dtype=np.int64)
    for i in range(snapshots):
        rng = _stream(sim, _STREAM_SNAPSHOT, i)
        rel = {k: rng.multinomial(int(n_molecules), p) for k in range(1, n + 1) if bits[k - 1]}
        cum = [0] + [_cumulative_from_patterns(rel, lambda k, j=j: j - k + 1) for j in range(1, n + 1)]
        out[i] = np.diff(cum)
    return out


class _PatternModel:
    """Pattern probabilities of both hops for the pattern engine."""

    def __init__(self, sim: SimConfig):
        link = sim.link
        self.sim = sim
        self.n = link.eval_slot
        obstacles_a = [((link.d_rd, 0.0, 0.0), link.r_d)] if sim.opaque_bodies else []
        jobs = [
            (link.hop_sr, _STREAM_POOL_A, obstacles_a),
            (link.hop_rd, _STREAM_POOL_B, []),
        ]

        def run(job):
            hop, key, obstacles = job
            codes = _boundary_patterns(hop, self.n, sim.reference_molecules, sim,
                                       _stream(sim, key), obstacles)
            return np.bincount(codes, minlength=2 ** self.n) / sim.reference_molecules

        self.p_a, self.p_b = pmap(run, jobs, min(2, sim.workers or default_workers()))

    def snapshot(self, index: int, bit: int, tau_r: int, tau_d: int) -> _Outcome:
        sim, n, link = self.sim, self.n, self.sim.link
        rng = _stream(sim, _STREAM_SNAPSHOT, index)
        bits = link.prefix + (bit,)
        releases_a = {k: rng.multinomial(int(link.n_a), self.p_a)
                      for k in range(1, n + 1) if bits[k - 1]}
        relay = []
        prev = 0
        for j in range(1, n + 1):
            cum = _cumulative_from_patterns(releases_a, lambda k, j=j: j - k + 1)
            relay.append(1 if cum - prev >= tau_r else 0)
            prev = cum
        # the relay forwards its slot-j decision at time j*T_b
        releases_b = {j: rng.multinomial(int(link.n_b), self.p_b)
                      for j in range(1, n + 1) if relay[j - 1]}
        c_end = _cumulative_from_patterns(releases_b, lambda j: n + 1 - j)
        c_start = _cumulative_from_patterns(releases_b, lambda j: n - j)
        dest = 1 if c_end - c_start >= tau_d else 0
        return _Outcome(bit, relay[-1], dest)


@dataclass(frozen=True)
class TwoHopTrace:
    times: np.ndarray
    complexes_r: np.ndarray
    complexes_d: np.ndarray
    source_bits: tuple[int, ...]
    relay_bits: tuple[int, ...]
    dest_bit: int


def _two_hop_particles(sim: SimConfig, index: int, bit: int, tau_r: int, tau_d: int
                       ) -> TwoHopTrace:
    link = sim.link
    n = link.eval_slot
    k = sim.steps_per_slot
    rng = _stream(sim, _STREAM_SNAPSHOT, index)
    obstacles_a = [((link.d_rd, 0.0, 0.0), link.r_d)] if sim.opaque_bodies else []
    sp_a = _Species(link.r_r, link.kon_r, link.koff_r, link.diffusion, sim, obstacles_a)
    sp_b = _Species(link.r_d, link.kon_d, link.koff_d, link.diffusion, sim)
    bits = link.prefix + (bit,)
    n_steps = (n + 1) * k
    c_r = np.zeros(n_steps + 1, dtype=np.int64)
    c_d = np.zeros(n_steps + 1, dtype=np.int64)
    relay = []
    for slot in range(n + 1):
        if slot < n and bits[slot]:
            sp_a.release(int(link.n_a), (-link.d_sr, 0.0, 0.0))
        if slot >= 1 and relay[slot - 1]:
            sp_b.release(int(link.n_b), (-link.d_rd, 0.0, 0.0))
        for s in range(1, k + 1):
            i = slot * k + s
            c_r[i] = sp_a.step(rng)
            c_d[i] = sp_b.step(rng)
        if slot < n:
            net = c_r[(slot + 1) * k] - c_r[slot * k]
            relay.append(1 if net >= tau_r else 0)
    dest = 1 if c_d[n_steps] - c_d[n * k] >= tau_d else 0
    times = np.arange(n_steps + 1) * sim.dt
    return TwoHopTrace(times, c_r, c_d, bits, tuple(relay), dest)


def simulate_two_hop_trace(sim: SimConfig, bit: int = 1, snapshot: int = 0) -> TwoHopTrace:
    """Full particle trace of one two-hop snapshot with evaluated source bit ``bit``."""
    tau_r, tau_d = _resolved_thresholds(sim.link)
    return _two_hop_particles(sim, snapshot, int(bit), tau_r, tau_d)


def _frequency(num: int, den: int) -> float:
    return num / den if den else float("nan")


def simulate_two_hop_ber(sim: SimConfig) -> BerEstimate:
    """Monte Carlo end-to-end error of the two-hop link.

    The first ``round(P1 * snapshots)`` snapshots send 1 in the evaluated slot
    and the rest send 0. The relay decodes every slot with ``tau_R`` and
    forwards its decisions; the destination decides slot ``n+1`` with
    ``tau_D``. ``pe = P1 e1 + P0 e0`` and the Wilson interval uses the
    corresponding effective sample size. Unset thresholds take their
    analytical optimum. Results depend only on ``sim.seed``, never on the
    worker count.
    """
    link = sim.link
    tau_r, tau_d = _resolved_thresholds(link)
    bits = _source_bits(sim)
    workers = sim.workers if sim.workers is not None else default_workers()

    if sim.engine == ENGINE_PATTERN:
        model = _PatternModel(sim)

        def run(i):
            return model.snapshot(i, int(bits[i]), tau_r, tau_d)
    else:
        def run(i):
            t = _two_hop_particles(sim, i, int(bits[i]), tau_r, tau_d)
            return _Outcome(int(bits[i]), t.relay_bits[-1], t.dest_bit)

    chunk = max(1, sim.snapshots // max(1, 4 * workers))
    blocks = [range(s, min(s + chunk, sim.snapshots)) for s in range(0, sim.snapshots, chunk)]
    outcomes = [o for block in pmap(lambda b: [run(i) for i in b], blocks, workers) for o in block]
    arr = np.array(outcomes, dtype=np.int64).reshape(-1, 3)
    return _summarize(arr, link, tau_r, tau_d)


def _summarize(arr: np.ndarray, link: LinkConfig, tau_r: int, tau_d: int) -> BerEstimate:
    s, r, d = arr[:, 0], arr[:, 1], arr[:, 2]
    n1 = int(np.count_nonzero(s == 1))
    n0 = len(s) - n1
    e1 = _frequency(int(np.count_nonzero((s == 1) & (d == 0))), n1)
    e0 = _frequency(int(np.count_nonzero((s == 0) & (d == 1))), n0)
    w1 = link.p1 if n1 else 0.0
    w0 = link.p0 if n0 else 0.0
    pe = (w1 * (e1 if n1 else 0.0) + w0 * (e0 if n0 else 0.0)) / (w1 + w0)
    var = ((w1 ** 2 * e1 * (1 - e1) / n1 if n1 else 0.0)
           + (w0 ** 2 * e0 * (1 - e0) / n0 if n0 else 0.0)) / (w1 + w0) ** 2
    n_eff = pe * (1 - pe) / var if var > 0 else float(len(s))
    ci = wilson_interval(pe, n_eff)

    def cond(a_mask, b_mask):
        return _frequency(int(np.count_nonzero(a_mask & b_mask)), int(np.count_nonzero(a_mask)))

    z1 = _frequency(int(np.count_nonzero((s == 1) & (r == 0))), n1)
    z0 = _frequency(int(np.count_nonzero((s == 0) & (r == 0))), n0)
    relay_zero = (w1 * (z1 if n1 else 0.0) + w0 * (z0 if n0 else 0.0)) / (w1 + w0)
    br = EmpiricalBreakdown(
        p_s1r0=cond(s == 1, r == 0), p_s0r1=cond(s == 0, r == 1),
        p_s1r1=cond(s == 1, r == 1), p_s0r0=cond(s == 0, r == 0),
        p_r1d0=cond(r == 1, d == 0), p_r0d1=cond(r == 0, d == 1),
        p_r1d1=cond(r == 1, d == 1), p_r0d0=cond(r == 0, d == 0),
        pe=pe, tau_r=tau_r, tau_d=tau_d,
        relay_zero=relay_zero, snapshots=len(s), ci95=ci)
    return BerEstimate(pe, ci, br)


def write_trace_csv(path, trace: TwoHopTrace) -> None:
    """CSV with columns ``time_s, complexes_R, complexes_D``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "complexes_R", "complexes_D"])
        for t, a, b in zip(trace.times, trace.complexes_r, trace.complexes_d):
            w.writerow([f"{t:.6g}", int(a), int(b)])
