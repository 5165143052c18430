"""Seeded skeleton simulation (compiled kernel with a numpy fallback)."""

from .backend import available_backends, get_backend
from .engine import (
    CurrentEstimate,
    EscapeEstimate,
    Estimate,
    SimConfig,
    binomial_estimate,
    estimate_absorption_steps,
    estimate_current,
    estimate_escape,
    estimate_harmonic_measure,
    estimate_hitting,
    estimate_return,
    jump_table,
    simulate,
    start_states,
)

__all__ = [
    "CurrentEstimate",
    "EscapeEstimate",
    "Estimate",
    "SimConfig",
    "available_backends",
    "binomial_estimate",
    "estimate_absorption_steps",
    "estimate_current",
    "estimate_escape",
    "estimate_harmonic_measure",
    "estimate_hitting",
    "estimate_return",
    "get_backend",
    "jump_table",
    "simulate",
    "start_states",
]
