"""Centralized numerical tolerances."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    stationarity: float = 1e-12
    involution: float = 1e-14
    harmonic: float = 1e-10
    mean_zero: float = 1e-12
    bound_slack: float = 1e-10
    cross_route: float = 1e-8
    feasibility: float = 1e-9


TOL = Tolerances()
