"""Flow (Thomson-type) route to capacities and flow-based upper bounds.

The capacity equals the infimum of ``||Phi_f - phi||^2`` over test functions
``f`` (1 on ``A``, 0 on ``B``) and flows ``phi`` with no divergence off
``A u B`` and zero total divergence on each of ``A`` and ``B``. The infimum is
attained at ``f = (V + V*) / 2``, ``phi = (Phi_{V*} - Phi*_V) / 2``.
"""

from __future__ import annotations

import numpy as np

from ..chain import ChainModel, ConductanceGraph, adjoint, conductances
from ..collapse import collapse_pair
from ..config import TOL
from ..errors import BadBoundary, BoundViolated, InfeasibleFlow, SingularSystem
from ..potentials import as_index_array, capacity_prob, equilibrium_potential, hitting_probability, validate_pair
from .algebra import Flow, divergence, flow_inner, gradient_flow, phi_flow, upsilon_flow


def _feasibility_scale(phi: Flow) -> float:
    return max(float(np.abs(phi.values).max(initial=0.0)), 1.0)


def optimal_pair(V: np.ndarray, V_star: np.ndarray, graph: ConductanceGraph) -> tuple[np.ndarray, Flow]:
    """Optimal test function and flow built from the two equilibrium potentials."""
    f = 0.5 * (V + V_star)
    phi = 0.5 * (phi_flow(V_star, graph) - phi_flow(V, graph.adjoint()))
    return f, phi


def optimal_flow(chain: ChainModel, A, B) -> tuple[np.ndarray, Flow]:
    """Optimizer ``(f, phi)`` of the flow principle on the chain itself."""
    sol = equilibrium_potential(chain, A, B)
    return optimal_pair(sol.V, sol.V_star, conductances(chain))


def capacity_flow(chain: ChainModel, A, B, return_flow: bool = False):
    """Capacity as ``||Phi_f - phi||^2`` at the optimizer on the pair-collapsed chain.

    The optimal flow is checked to be divergence free at every collapsed
    state, including the two fresh ones.
    """
    A, B = validate_pair(chain, A, B)
    bar, cmap = collapse_pair(chain, A, B)
    a, b = cmap.fresh_states
    V = hitting_probability(bar, np.array([a]), np.array([b]))
    V_star = hitting_probability(adjoint(bar), np.array([a]), np.array([b]))
    g = conductances(bar)
    f, phi = optimal_pair(V, V_star, g)
    div = divergence(phi)
    if np.abs(div).max() > TOL.feasibility * _feasibility_scale(phi):
        raise SingularSystem(f"optimal flow has divergence {np.abs(div).max():.3e}")
    resid = phi_flow(f, g) - phi
    cap = flow_inner(resid, resid, g)
    if return_flow:
        return cap, (bar, f, phi)
    return cap


def check_feasible(phi: Flow, A: np.ndarray, B: np.ndarray, tol: float | None = None) -> None:
    tol = TOL.feasibility if tol is None else tol
    div = divergence(phi)
    scale = _feasibility_scale(phi)
    inner = np.ones(phi.graph.n, dtype=bool)
    inner[A] = inner[B] = False
    worst = max(
        float(np.abs(div[inner]).max(initial=0.0)),
        abs(float(div[A].sum())),
        abs(float(div[B].sum())),
    )
    if worst > tol * scale:
        raise InfeasibleFlow(f"flow violates the divergence constraints by {worst:.3e}")


def flow_functional(chain: ChainModel, A, B, f, phi: Flow, form: str = "full", graph: ConductanceGraph | None = None) -> float:
    """``||Phi_f - phi||^2`` for a feasible pair ``(f, phi)``.

    ``form="split"`` evaluates the equal quantity ``D(f) + ||Upsilon_f - phi||^2``.
    """
    A, B = validate_pair(chain, A, B)
    f = np.asarray(f, dtype=float)
    if f.shape != (chain.n,):
        raise BadBoundary("test function has the wrong length")
    if np.any(f[A] != 1.0) or np.any(f[B] != 0.0):
        raise BadBoundary("test function must equal 1 on A and 0 on B")
    g = conductances(chain) if graph is None else graph
    check_feasible(phi, A, B)
    if form == "full":
        r = phi_flow(f, g) - phi
        return flow_inner(r, r, g)
    if form == "split":
        psi = gradient_flow(f, g)
        r = upsilon_flow(f, g) - phi
        return flow_inner(psi, psi, g) + flow_inner(r, r, g)
    raise ValueError("form must be 'full' or 'split'")


def upper_bound_43(chain: ChainModel, x: int, B, F, check: bool = True) -> float:
    """Explicit upper bound on ``Cap({x}, B)`` from a test function ``F``.

    ``D(F) + sum_inner (c_a^2/c_s)(F(u)+F(v)-2)^2 + 4 sum_boundary c_a^2/c_s``,
    where inner edges have both ends off ``B`` and boundary edges exactly one.
    On a truncation ``B`` is its collapsed exterior. With ``check`` the bound
    is compared against the exact capacity.
    """
    B = as_index_array(chain, B, "B")
    F = np.asarray(F, dtype=float)
    x = int(x)
    if F.shape != (chain.n,) or F[x] != 1.0 or np.any(F[B] != 0.0):
        raise BadBoundary("F must equal 1 at x and 0 on B")
    if np.any(F < 0) or np.any(F > 1):
        raise BadBoundary("F must take values in [0, 1]")
    g = conductances(chain)
    inB = np.zeros(chain.n, dtype=bool)
    inB[B] = True
    tb, hb = inB[g.tail], inB[g.head]
    ratio = g.ca**2 / g.cs
    dF = F[g.tail] - F[g.head]
    D = float(np.sum(g.cs * dF**2))
    inner = ~tb & ~hb
    bdry = tb ^ hb
    s = F[g.tail] + F[g.head] - 2.0
    value = D + float(np.sum(ratio[inner] * s[inner] ** 2)) + 4.0 * float(np.sum(ratio[bdry]))
    if check:
        cap = capacity_prob(chain, [x], B)
        if value < cap * (1 - TOL.bound_slack):
            raise BoundViolated(f"bound {value!r} below the exact capacity {cap!r}")
    return value
