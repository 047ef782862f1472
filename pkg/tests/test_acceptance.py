"""Acceptance criteria 1 to 9.

Each test carries ``@pytest.mark.acceptance(n)``; conftest prints one
PASS/FAIL line per criterion at the end of the run, with the measured values
attached through the ``report`` fixture. Runtime limits are asserted too.
"""

import math
import time

import numpy as np
import pytest

from dfrelay.channel_model import HopChannel, ReceiverKinetics, binding_response
from dfrelay.link_analysis import (
    LinkConfig,
    direct_error,
    optimize_thresholds,
    sweep_allocation,
    sweep_relay_position,
    two_hop_error,
)
from dfrelay.numerics import SkellamDist, skellam_pmf
from dfrelay.particle_sim import SimConfig, estimate_psi_mc, simulate_two_hop_ber

from oracles import D_PAPER, poisson_difference_pmf

LINK = LinkConfig()


def kinetics(link, k_on, k_off):
    return link.replace(kon_r=k_on, kon_d=k_on, koff_r=k_off, koff_d=k_off)


@pytest.mark.acceptance(1)
def test_skellam_matches_poisson_difference(report):
    means = [0.1, 1.0, 5.0, 20.0]
    ms = np.arange(-60, 61)
    start = time.perf_counter()
    got = {(a, b): skellam_pmf(ms, SkellamDist(a, b)) for a in means for b in means}
    elapsed = time.perf_counter() - start
    worst = max(abs(got[a, b][i] - poisson_difference_pmf(int(m), a, b))
                for a in means for b in means for i, m in enumerate(ms))
    report(f"max abs diff {worst:.2e} over {len(got) * len(ms)} points, {elapsed:.3f} s")
    assert worst <= 1e-10
    assert elapsed < 1.0


@pytest.mark.acceptance(2)
def test_binding_response_matches_simulation(report):
    times = [0.1, 0.3, 0.5, 0.7]
    start = time.perf_counter()
    worst = 0.0
    for seed, (k_on, k_off) in enumerate([(1e4, 100.0), (2e3, 10.0)], start=1):
        hop = HopChannel(D_PAPER, 15.0, ReceiverKinetics(5.0, k_on, k_off))
        for t, p_hat, se in estimate_psi_mc(hop, times, 100_000, seed):
            z = (p_hat - binding_response(t, hop)) / se
            worst = max(worst, abs(z))
    elapsed = time.perf_counter() - start
    report(f"max |z| = {worst:.2f} over 8 points, {elapsed:.1f} s")
    assert worst <= 3.0
    assert elapsed < 120.0


@pytest.mark.acceptance(3)
def test_absorbing_limit(report):
    hop = HopChannel(D_PAPER, 15.0, ReceiverKinetics(5.0, 1e8, 0.0))
    start = time.perf_counter()
    worst = 0.0
    for t in (0.1, 0.5, 1.0):
        ref = (5.0 / 15.0) * math.erfc(10.0 / (2 * math.sqrt(D_PAPER * t)))
        worst = max(worst, abs(binding_response(t, hop) / ref - 1))
    elapsed = time.perf_counter() - start
    report(f"max relative deviation {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 0.02
    assert elapsed < 30.0


@pytest.mark.acceptance(4)
def test_analysis_inside_simulated_interval(report, threads):
    start = time.perf_counter()
    results = []
    for ratio in (0.4, 0.5, 0.6):
        link = LINK.replace(d_sr=ratio * LINK.d_sd)
        est = simulate_two_hop_ber(SimConfig(link=link, snapshots=10_000, workers=threads))
        pe = two_hop_error(link).pe
        results.append((ratio, pe, est))
    elapsed = time.perf_counter() - start
    report(", ".join(f"ratio {r}: analytic {pe:.4f} vs MC {e.pe:.4f} [{e.ci95[0]:.4f}, {e.ci95[1]:.4f}]"
                     for r, pe, e in results) + f", {elapsed:.0f} s")
    assert elapsed < 900.0
    for _, pe, est in results:
        assert est.ci95[0] <= pe <= est.ci95[1]


@pytest.mark.acceptance(5)
def test_relay_midpoint_is_best(report, threads):
    ratios = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    start = time.perf_counter()
    pe = [p.pe for p in sweep_relay_position(LINK, ratios, threads)]
    elapsed = time.perf_counter() - start
    mid = pe[ratios.index(0.5)]
    report(f"pe(0.2) / pe(0.5) = {pe[0] / mid:.2f}, pe(0.8) / pe(0.5) = {pe[-1] / mid:.2f}, {elapsed:.1f} s")
    assert ratios[int(np.argmin(pe))] == 0.5
    assert pe[0] >= 3 * mid and pe[-1] >= 3 * mid
    assert elapsed < 300.0


@pytest.mark.acceptance(6)
def test_relay_beats_direct(report):
    start = time.perf_counter()
    notes, wins = [], []
    for k_on, k_off in [(1e4, 100.0), (2e3, 10.0)]:
        link = kinetics(LINK, k_on, k_off)
        _, _, relay = optimize_thresholds(link)
        direct = direct_error(link, 2000)
        notes.append(f"({k_on:g}, {k_off:g}): relay {relay:.4f} vs direct {direct:.4f}")
        wins.append(relay < direct)
    elapsed = time.perf_counter() - start
    report("; ".join(notes) + f", {elapsed:.1f} s")
    assert all(wins)
    assert elapsed < 300.0


@pytest.mark.acceptance(7)
def test_even_allocation_is_best(report, threads):
    grid = list(range(200, 1801, 200))
    start = time.perf_counter()
    pe = [p.pe for p in sweep_allocation(LINK, 2000, grid, threads)]
    elapsed = time.perf_counter() - start
    best = int(np.argmin(pe))
    report(f"minimum at N_A = {grid[best]}, pe = {pe[best]:.4f}, {elapsed:.1f} s")
    assert abs(grid[best] - 1000) <= 200
    assert all(a > b for a, b in zip(pe[:best], pe[1:best + 1]))
    assert all(a < b for a, b in zip(pe[best:], pe[best + 1:]))
    assert elapsed < 300.0


@pytest.mark.acceptance(8)
def test_kinetics_ordering(report):
    start = time.perf_counter()
    fast_release = optimize_thresholds(kinetics(LINK, 1e4, 10.0))[2]
    default = optimize_thresholds(kinetics(LINK, 1e4, 100.0))[2]
    slow_binding = optimize_thresholds(kinetics(LINK, 2e3, 100.0))[2]
    elapsed = time.perf_counter() - start
    report(f"pe {fast_release:.5f} <= {default:.5f} <= {slow_binding:.5f}, {elapsed:.1f} s")
    assert fast_release <= default <= slow_binding
    assert elapsed < 300.0


@pytest.mark.acceptance(9)
def test_worker_count_does_not_change_result(report):
    link = LINK.replace(n_a=200.0, n_b=200.0, budget=None, tau_r=18, tau_d=18)
    base = SimConfig(link=link, snapshots=600, seed=99, reference_molecules=20_000)
    start = time.perf_counter()
    pes = [simulate_two_hop_ber(base.replace(workers=w)).pe for w in (1, 2, 4)]
    elapsed = time.perf_counter() - start
    report(f"pe = {pes[0]!r} for workers 1, 2, 4, {elapsed:.1f} s")
    assert pes[0] == pes[1] == pes[2]
    assert elapsed < 120.0
