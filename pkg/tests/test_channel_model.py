import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfrelay.channel_model import (
    KERNEL_FLUX,
    KERNEL_U,
    ChannelModelError,
    HopChannel,
    ReceiverKinetics,
    SlotContext,
    absorbing_sphere_fraction,
    binding_response,
    mean_bound_pair,
    psi_samples,
    slot_count_distribution,
    u_transform,
    u_transform_flux,
)

from oracles import D_PAPER, PSI_TALBOT, PSI_TALBOT_D30, PSI_TALBOT_U, absorbing_fraction, u_transform_reference


def hop(k_on=1e4, k_off=100.0, d=15.0, r=5.0, D=D_PAPER):
    return HopChannel(D, d, ReceiverKinetics(r, k_on, k_off))


class TestTransform:
    @pytest.mark.parametrize("w", [1e-3, 0.7, 12.0, 480.0, 3e4])
    @pytest.mark.parametrize("kin", [(1e4, 100.0), (2e3, 10.0), (0.0, 100.0), (50.0, 0.0)])
    def test_matches_extended_precision(self, w, kin):
        h = hop(*kin)
        ref = u_transform_reference(w, 15.0, 5.0, D_PAPER, *kin)
        assert abs(u_transform(w, h) - ref) <= 1e-12 * abs(ref) + 1e-300

    def test_inert_receiver_closed_form(self):
        # k_on = 0 leaves the bare sphere: (1 - q r / (1 + q r)) e^{-(d-r) q} / (4 pi d D)
        h = hop(0.0, 100.0)
        w = 3.0
        q = complex(math.sqrt(w / D_PAPER / 2), math.sqrt(w / D_PAPER / 2))
        ref = (1 / (1 + q * 5.0)) * np.exp(-10.0 * q) / (4 * math.pi * 15.0 * D_PAPER)
        assert u_transform(w, h) == pytest.approx(ref, rel=1e-13)

    def test_low_frequency_limit(self):
        # as w -> 0 the transform tends to the steady-state value 1 / (4 pi d D)
        u = u_transform(1e-12, hop())
        assert u.real == pytest.approx(1 / (4 * math.pi * 15.0 * D_PAPER), rel=1e-5)
        assert abs(u.imag) < 1e-5 * u.real

    def test_flux_transform_vanishes_without_binding(self):
        assert u_transform_flux(2.0, hop(0.0, 100.0)) == 0

    def test_flux_transform_approaches_full_one_for_fast_binding(self):
        h = hop(1e12, 0.0)
        w = 5.0
        assert u_transform_flux(w, h) == pytest.approx(u_transform(w, h), rel=1e-7)

    @pytest.mark.parametrize("w", [0.0, -1.0])
    def test_rejects_nonpositive_frequency(self, w):
        with pytest.raises(ChannelModelError):
            u_transform(w, hop())
        with pytest.raises(ChannelModelError):
            u_transform_flux(w, hop())


class TestBindingResponse:
    @pytest.mark.parametrize("kin", sorted(PSI_TALBOT))
    def test_flux_kernel_matches_laplace_inversion(self, kin):
        h = hop(*kin)
        for t, ref in PSI_TALBOT[kin].items():
            assert binding_response(t, h) == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("kin", sorted(PSI_TALBOT_U))
    def test_literal_kernel_matches_laplace_inversion(self, kin):
        h = hop(*kin)
        for t, ref in PSI_TALBOT_U[kin].items():
            assert binding_response(t, h, kernel=KERNEL_U) == pytest.approx(ref, abs=1e-9)

    def test_far_hop(self):
        h = hop(d=30.0)
        for t, ref in PSI_TALBOT_D30.items():
            assert binding_response(t, h) == pytest.approx(ref, abs=1e-9)

    def test_tiny_time_is_essentially_zero(self):
        assert 0.0 <= binding_response(1e-6, hop()) < 1e-6

    def test_flux_kernel_is_zero_without_binding(self):
        assert binding_response(0.7, hop(0.0, 100.0)) == 0.0

    def test_literal_kernel_reports_contact_without_binding(self):
        assert binding_response(0.7, hop(0.0, 100.0), kernel=KERNEL_U) > 0.05

    @pytest.mark.parametrize("t", [0.2, 0.7, 2.1])
    def test_absorbing_limit(self, t):
        h = hop(1e9, 0.0)
        assert binding_response(t, h, tol=1e-10) == pytest.approx(absorbing_fraction(t, 15.0, 5.0, D_PAPER),
                                                                 rel=1e-4)
        assert absorbing_sphere_fraction(t, h) == pytest.approx(absorbing_fraction(t, 15.0, 5.0, D_PAPER),
                                                               rel=1e-14)

    def test_rejects_nonpositive_time_and_tol(self):
        with pytest.raises(ChannelModelError):
            binding_response(0.0, hop())
        with pytest.raises(ChannelModelError):
            binding_response(0.7, hop(), tol=0.0)

    def test_unknown_kernel(self):
        with pytest.raises(ChannelModelError):
            binding_response(0.7, hop(), kernel="laplace")

    def test_samples_helper(self):
        h = hop()
        assert psi_samples(h, [0.7, 1.4]) == [binding_response(0.7, h), binding_response(1.4, h)]


class TestMonotonicity:
    @settings(max_examples=15)
    @given(st.floats(6.0, 40.0), st.floats(0.5, 10.0))
    def test_decreasing_in_distance(self, d, extra):
        assert binding_response(0.7, hop(d=d)) >= binding_response(0.7, hop(d=d + extra)) - 1e-9

    @settings(max_examples=15)
    @given(st.floats(10.0, 1e4), st.floats(1.1, 10.0))
    def test_increasing_in_k_on(self, k_on, factor):
        assert binding_response(0.7, hop(k_on=k_on * factor)) >= binding_response(0.7, hop(k_on=k_on)) - 1e-9

    @settings(max_examples=15)
    @given(st.floats(0.0, 500.0), st.floats(1.0, 100.0))
    def test_decreasing_in_k_off(self, k_off, extra):
        assert binding_response(0.7, hop(k_off=k_off + extra)) <= binding_response(0.7, hop(k_off=k_off)) + 1e-9

    def test_irreversible_binding_only_accumulates(self):
        h = hop(k_off=0.0)
        vals = psi_samples(h, np.linspace(0.1, 5.0, 15))
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 5.0 / 15.0


def ctx(bits, n, emission=1000.0, tb=0.7):
    return SlotContext(tuple(bits), emission, n, tb)


class TestSlotStatistics:
    def test_term_by_term_for_all_ones(self):
        h = hop()
        p = {k: binding_response(k * 0.7, h) for k in (1, 2, 3)}
        lam1, lam2 = mean_bound_pair(ctx((1, 1, 1), 3), h)
        assert lam1 == pytest.approx(1000 * (p[3] + p[2] + p[1]), rel=1e-14)
        assert lam2 == pytest.approx(1000 * (p[2] + p[1]), rel=1e-14)

    def test_first_slot_has_no_history(self):
        h = hop()
        assert mean_bound_pair(ctx((1,), 1), h) == (1000 * binding_response(0.7, h), 0.0)

    def test_silent_sequence(self):
        assert mean_bound_pair(ctx((0, 0, 0), 3), hop()) == (0.0, 0.0)
        assert mean_bound_pair(ctx((1, 1, 1), 3, emission=0.0), hop()) == (0.0, 0.0)

    def test_only_past_slots_count(self):
        h = hop()
        assert mean_bound_pair(ctx((1, 0, 1), 2), h) == mean_bound_pair(ctx((1, 0, 0), 2), h)

    @given(st.lists(st.integers(0, 1), min_size=3, max_size=3), st.floats(0.0, 5000.0))
    def test_linear_in_emission(self, bits, n_mol):
        h = hop()
        base = mean_bound_pair(ctx(bits, 3, 1.0), h)
        scaled = mean_bound_pair(ctx(bits, 3, n_mol), h)
        assert scaled[0] == pytest.approx(n_mol * base[0], rel=1e-12, abs=1e-12)
        assert scaled[1] == pytest.approx(n_mol * base[1], rel=1e-12, abs=1e-12)

    def test_additive_over_transmissions(self):
        h = hop()
        a = mean_bound_pair(ctx((1, 0, 0), 3), h)
        b = mean_bound_pair(ctx((0, 1, 1), 3), h)
        c = mean_bound_pair(ctx((1, 1, 1), 3), h)
        assert c == pytest.approx((a[0] + b[0], a[1] + b[1]), rel=1e-14)

    def test_distribution_wraps_means(self):
        h = hop()
        dist = slot_count_distribution(ctx((1, 1), 2), h)
        assert (dist.lambda1, dist.lambda2) == mean_bound_pair(ctx((1, 1), 2), h)
        assert dist.mean == pytest.approx(1000 * binding_response(1.4, h), rel=1e-12)


class TestValidation:
    def test_receiver(self):
        with pytest.raises(ChannelModelError):
            ReceiverKinetics(0.0, 1.0, 1.0)
        with pytest.raises(ChannelModelError):
            ReceiverKinetics(5.0, -1.0, 1.0)
        with pytest.raises(ChannelModelError):
            ReceiverKinetics(5.0, 1.0, -1.0)

    def test_hop(self):
        with pytest.raises(ChannelModelError):
            hop(d=5.0)
        with pytest.raises(ChannelModelError):
            hop(D=0.0)

    def test_slot_context(self):
        with pytest.raises(ChannelModelError):
            ctx((), 1)
        with pytest.raises(ChannelModelError):
            ctx((1, 2), 1)
        with pytest.raises(ChannelModelError):
            ctx((1, 1), 3)
        with pytest.raises(ChannelModelError):
            ctx((1, 1), 1, emission=-1.0)
        with pytest.raises(ChannelModelError):
            ctx((1, 1), 1, tb=0.0)

    def test_errors_are_value_errors(self):
        assert issubclass(ChannelModelError, ValueError)


def test_kernel_names():
    assert {KERNEL_FLUX, KERNEL_U} == {"flux", "u-transform"}
