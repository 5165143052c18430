"""Potential theory for finite non-reversible Markov chains.

Capacities between state sets are computed by three independent routes
(escape probabilities, the min-max Dirichlet functional and the flow
principle) and checked against seeded skeleton simulation. Lattice
truncations support recurrence experiments in random cycle environments.
"""

__version__ = "0.1.0"

from .chain import (
    ChainModel,
    ConductanceGraph,
    adjoint,
    build_chain,
    conductances,
    from_sparse,
    is_reversible,
    skeleton,
    stationary_measure,
    symmetrize,
)
from .collapse import CollapseMap, FiniteFamily, collapse_exterior, collapse_pair, collapse_set
from .config import TOL, Tolerances
from .errors import *  # noqa: F401,F403
from .fileio import chain_from_dict, dump_chain, load_chain
from .flows import (
    Flow,
    capacity_flow,
    cycle_flow,
    divergence,
    flow_functional,
    flow_inner,
    gradient_flow,
    optimal_flow,
    phi_flow,
    project_feasible,
    project_gradient,
    upper_bound_43,
    upsilon_flow,
)
from .potentials import (
    CapacityReport,
    GreenFunction,
    PotentialSolution,
    capacity_prob,
    capacity_prob_reversed,
    current,
    equilibrium_potential,
    green_killed,
    harmonic_measure,
    point_capacity,
)
from .variational import (
    capacity_bounds_check,
    capacity_minmax,
    dirichlet_functional,
    pointwise_bound_check,
    sector_constant,
)
