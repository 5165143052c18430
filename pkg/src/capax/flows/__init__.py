"""Flows on arcs, the flow route to capacities and flow-based bounds."""

from .algebra import (
    Flow,
    ca_flow,
    cycle_flow,
    divergence,
    feasibility_residuals,
    flow_inner,
    gradient_flow,
    phi_flow,
    project_feasible,
    project_gradient,
    upsilon_flow,
)
from .thomson import capacity_flow, check_feasible, flow_functional, optimal_flow, optimal_pair, upper_bound_43

__all__ = [
    "Flow",
    "ca_flow",
    "capacity_flow",
    "check_feasible",
    "cycle_flow",
    "divergence",
    "feasibility_residuals",
    "flow_functional",
    "flow_inner",
    "gradient_flow",
    "optimal_flow",
    "optimal_pair",
    "phi_flow",
    "project_feasible",
    "project_gradient",
    "upper_bound_43",
    "upsilon_flow",
]
