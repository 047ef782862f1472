"""Particle-based Monte Carlo of the two-hop link."""

from .simulator import (
    ENGINE_PARTICLES,
    ENGINE_PATTERN,
    PLACE_BALANCED,
    PLACE_FIXED,
    PLACE_HALF_GAUSSIAN,
    RULE_ERBAN_CHAPMAN,
    RULE_ROBIN,
    BerEstimate,
    EmpiricalBreakdown,
    HopTrace,
    SimConfig,
    SimConfigError,
    TwoHopTrace,
    brownian_step,
    dissociation_probability,
    dissociation_step,
    erban_chapman_probability,
    estimate_psi_mc,
    pattern_slot_counts,
    simulate_hop,
    simulate_two_hop_ber,
    simulate_two_hop_trace,
    surface_interaction,
    wilson_interval,
    write_trace_csv,
)

__all__ = [
    "ENGINE_PARTICLES", "ENGINE_PATTERN", "PLACE_BALANCED", "PLACE_FIXED", "PLACE_HALF_GAUSSIAN",
    "RULE_ERBAN_CHAPMAN", "RULE_ROBIN", "BerEstimate", "EmpiricalBreakdown", "HopTrace",
    "SimConfig", "SimConfigError", "TwoHopTrace", "brownian_step", "dissociation_step",
    "erban_chapman_probability", "estimate_psi_mc", "pattern_slot_counts", "simulate_hop", "simulate_two_hop_ber",
    "simulate_two_hop_trace", "surface_interaction", "wilson_interval", "write_trace_csv",
]
