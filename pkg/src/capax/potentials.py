"""Equilibrium potentials, capacities, Green functions and currents.

All hitting quantities are computed on the discrete skeleton; holding rates
only enter through ``M = mu * lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .chain import ChainModel, adjoint, conductances, label_str, skeleton
from .config import TOL
from .errors import EmptySet, SetsIntersect, SingularSystem, ValidationError


def as_index_array(chain: ChainModel, S, name: str = "set") -> np.ndarray:
    idx = np.unique(np.asarray(list(S), dtype=np.int64))
    if idx.size == 0:
        raise EmptySet(f"{name} is empty")
    if idx.min() < 0 or idx.max() >= chain.n:
        raise ValidationError(f"{name} contains indices outside the state space")
    return idx


def validate_pair(chain: ChainModel, A, B) -> tuple[np.ndarray, np.ndarray]:
    A = as_index_array(chain, A, "A")
    B = as_index_array(chain, B, "B")
    if np.intersect1d(A, B).size:
        raise SetsIntersect("A and B must be disjoint")
    return A, B


def _factor(M: sp.spmatrix):
    try:
        lu = splu(sp.csc_matrix(M))
    except RuntimeError as exc:
        raise SingularSystem(f"linear system is singular: {exc}") from exc
    return lu


def _refined_solve(lu, M: sp.spmatrix, b: np.ndarray, trans: str = "N") -> np.ndarray:
    x = lu.solve(b, trans=trans)
    r = b - (M.T @ x if trans == "T" else M @ x)
    return x + lu.solve(r, trans=trans)


def hitting_probability(chain: ChainModel, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``x -> P_x[T_A < T_B]`` for sorted disjoint index arrays ``A``, ``B``."""
    n = chain.n
    V = np.zeros(n)
    V[A] = 1.0
    inner = np.ones(n, dtype=bool)
    inner[A] = inner[B] = False
    I = np.flatnonzero(inner)
    if I.size == 0:
        return V
    P, _ = skeleton(chain)
    P_II = P[I][:, I]
    rhs = np.asarray(P[I][:, A].sum(axis=1)).ravel()
    K = (sp.identity(I.size, format="csc") - P_II).tocsc()
    lu = _factor(K)
    V[I] = _refined_solve(lu, K, rhs)
    if not np.all(np.isfinite(V)):
        raise SingularSystem("hitting probability solve produced non-finite values")
    # harmonicity re-check: |(LV)(x)| <= tol * lambda(x), i.e. |PV - V| <= tol
    res = np.abs(P[I] @ V - V[I])
    if res.size and res.max() > TOL.harmonic:
        raise SingularSystem(f"potential fails harmonicity (residual {res.max():.3e})")
    return np.clip(V, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PotentialSolution:
    """Forward and adjoint equilibrium potentials of a set pair."""

    A: np.ndarray
    B: np.ndarray
    V: np.ndarray
    V_star: np.ndarray

    @property
    def F(self) -> np.ndarray:
        return 0.5 * (self.V + self.V_star)


def equilibrium_potential(chain: ChainModel, A, B) -> PotentialSolution:
    """``V(x) = P_x[T_A < T_B]`` and the same for the adjoint chain."""
    A, B = validate_pair(chain, A, B)
    V = hitting_probability(chain, A, B)
    V_star = hitting_probability(adjoint(chain), A, B)
    return PotentialSolution(A=A, B=B, V=V, V_star=V_star)


def escape_probabilities(chain: ChainModel, A, B, V: np.ndarray | None = None) -> np.ndarray:
    """``P_a[T_A^+ > T_B^+]`` for each ``a`` in ``A`` by one-step decomposition."""
    A, B = validate_pair(chain, A, B)
    if V is None:
        V = hitting_probability(chain, A, B)
    R = chain.rates[A]
    return np.asarray(R @ (1.0 - V)).ravel() / chain.holding[A]


def _capacity_from(chain: ChainModel, A: np.ndarray, V: np.ndarray) -> float:
    # sum_a mu(a) sum_y r(a,y) (1 - V(y)), avoiding the cancellation in -LV
    return float(np.dot(chain.mu[A], chain.rates[A] @ (1.0 - V)))


def capacity_prob(chain: ChainModel, A, B) -> float:
    """Capacity as the ``M``-weighted escape probability from ``A`` to ``B``."""
    A, B = validate_pair(chain, A, B)
    V = hitting_probability(chain, A, B)
    cap = _capacity_from(chain, A, V)
    if not cap > 0:
        raise SingularSystem("capacity is not positive")
    return cap


def capacity_prob_reversed(chain: ChainModel, A, B) -> float:
    """Capacity from adjoint escapes ``B -> A``: ``sum_b M(b) P*_b[T_A^+ < T_B^+]``."""
    A, B = validate_pair(chain, A, B)
    adj = adjoint(chain)
    W = hitting_probability(adj, B, A)
    cap = _capacity_from(adj, B, W)
    if not cap > 0:
        raise SingularSystem("capacity is not positive")
    return cap


def harmonic_measure(chain: ChainModel, A, B) -> np.ndarray:
    """Normalized charge distribution on ``A``, as a full-length vector.

    States of ``A`` from which ``B`` cannot be reached before returning to
    ``A`` get mass zero.
    """
    A, B = validate_pair(chain, A, B)
    V = hitting_probability(chain, A, B)
    e = escape_probabilities(chain, A, B, V)
    w = chain.M[A] * e
    nu = np.zeros(chain.n)
    nu[A] = w / w.sum()
    return nu


def current(chain: ChainModel, A, B):
    """Unit current ``Cap^{-1} Phi_{V*}`` from ``A`` to ``B``, as a :class:`Flow`."""
    from .flows.algebra import phi_flow

    A, B = validate_pair(chain, A, B)
    V_star = hitting_probability(adjoint(chain), A, B)
    cap = capacity_prob(chain, A, B)
    return phi_flow(V_star, conductances(chain)) * (1.0 / cap)


# ----------------------------------------------------------------------------
# Green functions of the killed skeleton


@dataclass(frozen=True, eq=False)
class GreenFunction:
    """``G_B = (I - P_killed)^{-1}`` on the skeleton, indexed by parent states.

    Entries with either index in ``B`` are reported as zero.
    """

    chain: ChainModel
    B: np.ndarray
    interior: np.ndarray
    _K: sp.csc_matrix = field(repr=False)
    _lu: object = field(repr=False)

    @cached_property
    def _pos(self) -> np.ndarray:
        pos = np.full(self.chain.n, -1, dtype=np.int64)
        pos[self.interior] = np.arange(self.interior.size)
        return pos

    def _embed(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.chain.n)
        out[self.interior] = v
        return out

    def _unit(self, i: int) -> np.ndarray:
        p = self._pos[i]
        if p < 0:
            raise ValidationError(f"state {i} lies in the killing set")
        e = np.zeros(self.interior.size)
        e[p] = 1.0
        return e

    def column(self, y: int) -> np.ndarray:
        """``x -> G_B(x, y)``."""
        return self._embed(_refined_solve(self._lu, self._K, self._unit(y)))

    def row(self, x: int) -> np.ndarray:
        """``y -> G_B(x, y)``."""
        return self._embed(_refined_solve(self._lu, self._K, self._unit(x), trans="T"))

    def __call__(self, x: int, y: int) -> float:
        return float(self.column(y)[x])

    def diagonal_at(self, x: int) -> float:
        return float(self.column(x)[x])

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``x -> sum_y G_B(x, y) f(y)``."""
        f = np.asarray(f, dtype=float)
        return self._embed(_refined_solve(self._lu, self._K, f[self.interior]))

    def expected_steps(self) -> np.ndarray:
        """Expected number of skeleton jumps until ``B`` is reached."""
        return self.apply(np.ones(self.chain.n))

    def dense(self) -> np.ndarray:
        n = self.chain.n
        G = np.zeros((n, n))
        k = self.interior.size
        X = _refined_solve(self._lu, self._K, np.eye(k))
        G[np.ix_(self.interior, self.interior)] = X
        return G


def green_killed(chain: ChainModel, B) -> GreenFunction:
    """Green function of the skeleton killed on entering ``B``."""
    B = as_index_array(chain, B, "B")
    mask = np.ones(chain.n, dtype=bool)
    mask[B] = False
    I = np.flatnonzero(mask)
    if I.size == 0:
        raise EmptySet("killing set covers the whole state space")
    P, _ = skeleton(chain)
    K = (sp.identity(I.size, format="csc") - P[I][:, I]).tocsc()
    return GreenFunction(chain=chain, B=B, interior=I, _K=K, _lu=_factor(K))


def green_diagonal(chain: ChainModel, B, x: int) -> float:
    """Continuous-time ``G(x, x) = G_B(x, x) / lambda(x)`` (expected time at ``x``)."""
    return green_killed(chain, B).diagonal_at(x) / chain.holding[x]


def point_capacity(chain: ChainModel, B, x=None):
    """Capacity of interior states relative to the absorbing class ``B``.

    ``Cap(x) = mu(x) / G(x, x)`` with ``G`` the time-integrated Green
    function, i.e. ``M(x) P_x[T_x^+ > T_B]``. Returns a float for a single
    ``x`` and a dict over all interior states otherwise.
    """
    G = green_killed(chain, B)
    if x is not None:
        return float(chain.M[x] / G.diagonal_at(int(x)))
    return {int(i): float(chain.M[i] / G.diagonal_at(int(i))) for i in G.interior}


def return_escape_probability(chain: ChainModel, B, x: int) -> float:
    """``P_x[T_x^+ > T_B]`` for the skeleton."""
    return float(1.0 / green_killed(chain, B).diagonal_at(int(x)))


# ----------------------------------------------------------------------------
# reporting


@dataclass
class CapacityReport:
    """Capacity computed along several independent routes."""

    A: list
    B: list
    value_prob: float
    value_minmax: float | None = None
    value_flow: float | None = None
    value_reversed: float | None = None
    mc_estimate: tuple | None = None

    @property
    def values(self) -> list[float]:
        return [v for v in (self.value_prob, self.value_minmax, self.value_flow, self.value_reversed) if v is not None]

    @property
    def max_rel_dev(self) -> float:
        vals = self.values
        ref = abs(self.value_prob)
        return max((abs(a - b) / ref for a in vals for b in vals), default=0.0)

    def to_dict(self) -> dict:
        out = {
            "A": self.A,
            "B": self.B,
            "value_prob": self.value_prob,
            "value_minmax": self.value_minmax,
            "value_flow": self.value_flow,
            "value_reversed": self.value_reversed,
            "max_rel_dev": self.max_rel_dev,
        }
        if self.mc_estimate is not None:
            out["mc_estimate"] = {"mean": self.mc_estimate[0], "half_width_95": self.mc_estimate[1]}
        return out


def potential_rows(chain: ChainModel, sol: PotentialSolution) -> list[list]:
    """Rows ``state, label, V, V_star, F`` for CSV output."""
    F = sol.F
    return [[i, label_str(chain.labels[i]), sol.V[i], sol.V_star[i], F[i]] for i in range(chain.n)]
