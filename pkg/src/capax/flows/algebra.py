"""Flows on the arc set and their basic algebra.

A flow is an antisymmetric function on arcs. It is stored once per canonical
edge ``tail < head``; the value on the reversed arc is the negation, so
antisymmetry holds by construction.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..chain import ConductanceGraph
from ..errors import ArcMissing, ArcOutsideSupport, NotACycle, SingularSystem, ValidationError


def _same_arcs(g: ConductanceGraph, h: ConductanceGraph) -> bool:
    if g is h or (g.tail is h.tail and g.head is h.head):
        return True
    return np.array_equal(g.tail, h.tail) and np.array_equal(g.head, h.head)


class Flow:
    """Antisymmetric arc function supported on the arcs of ``graph``."""

    __slots__ = ("graph", "values")

    def __init__(self, graph: ConductanceGraph, values):
        values = np.array(values, dtype=float)
        if values.shape != (graph.n_edges,):
            raise ArcOutsideSupport("flow values must be given on the graph's edges")
        values.flags.writeable = False
        self.graph = graph
        self.values = values

    @classmethod
    def zero(cls, graph: ConductanceGraph) -> "Flow":
        return cls(graph, np.zeros(graph.n_edges))

    @classmethod
    def from_arcs(cls, graph: ConductanceGraph, arcs: Mapping[tuple[int, int], float]) -> "Flow":
        """Flow from an ``{(x, y): value}`` mapping; reversed arcs may also be listed."""
        vals = np.zeros(graph.n_edges)
        seen = {}
        for (x, y), v in arcs.items():
            eid, sign = graph.edge_of(x, y)
            if eid < 0:
                raise ArcOutsideSupport(f"({x}, {y}) is not an arc")
            v = sign * float(v)
            if eid in seen and seen[eid] != v:
                raise ValidationError(f"values on ({x}, {y}) and its reverse are not antisymmetric")
            seen[eid] = v
            vals[eid] = v
        return cls(graph, vals)

    def __call__(self, x: int, y: int) -> float:
        eid, sign = self.graph.edge_of(x, y)
        if eid < 0:
            raise ArcOutsideSupport(f"({x}, {y}) is not an arc")
        return sign * float(self.values[eid])

    def _check(self, other: "Flow") -> None:
        if not _same_arcs(self.graph, other.graph):
            raise ArcOutsideSupport("flows live on different arc sets")

    def __add__(self, other: "Flow") -> "Flow":
        self._check(other)
        return Flow(self.graph, self.values + other.values)

    def __sub__(self, other: "Flow") -> "Flow":
        self._check(other)
        return Flow(self.graph, self.values - other.values)

    def __neg__(self) -> "Flow":
        return Flow(self.graph, -self.values)

    def __mul__(self, k: float) -> "Flow":
        return Flow(self.graph, float(k) * self.values)

    __rmul__ = __mul__

    def norm2(self) -> float:
        return flow_inner(self, self, self.graph)

    def rows(self, labels: Sequence | None = None) -> list[list]:
        """``[from, to, value]`` rows in canonical orientation."""
        lab = labels if labels is not None else range(self.graph.n)
        lab = list(lab)
        return [[lab[t], lab[h], float(v)] for t, h, v in zip(self.graph.tail, self.graph.head, self.values)]


def flow_inner(phi: Flow, psi: Flow, graph: ConductanceGraph | None = None) -> float:
    """``(1/2) sum over arcs of phi * psi / c_s``; each edge counted once here."""
    graph = phi.graph if graph is None else graph
    if not (_same_arcs(phi.graph, graph) and _same_arcs(psi.graph, graph)):
        raise ArcOutsideSupport("flows are not supported on this graph's arcs")
    return float(np.sum(phi.values * psi.values / graph.cs))


def divergence(phi: Flow) -> np.ndarray:
    g = phi.graph
    return np.bincount(g.tail, weights=phi.values, minlength=g.n) - np.bincount(
        g.head, weights=phi.values, minlength=g.n
    )


def gradient_flow(f, graph: ConductanceGraph) -> Flow:
    """``Psi_f(x, y) = c_s(x, y) [f(x) - f(y)]``."""
    f = np.asarray(f, dtype=float)
    return Flow(graph, graph.cs * (f[graph.tail] - f[graph.head]))


def phi_flow(f, graph: ConductanceGraph) -> Flow:
    """``Phi_f(x, y) = f(x) c(x, y) - f(y) c(y, x)``.

    Passing ``graph.adjoint()`` gives the adjoint flow built from ``c*``.
    """
    f = np.asarray(f, dtype=float)
    return Flow(graph, f[graph.tail] * graph.c_fwd - f[graph.head] * graph.c_bwd)


def upsilon_flow(f, graph: ConductanceGraph) -> Flow:
    """``Upsilon_f(x, y) = c_a(x, y) [f(x) + f(y)]``, so that ``Phi_f = Psi_f + Upsilon_f``."""
    f = np.asarray(f, dtype=float)
    return Flow(graph, graph.ca * (f[graph.tail] + f[graph.head]))


def ca_flow(graph: ConductanceGraph) -> Flow:
    return Flow(graph, graph.ca)


def cycle_flow(cycle: Sequence[int], graph: ConductanceGraph) -> Flow:
    """Unit flow around a closed cycle ``(x0, x1, ..., x0)``."""
    cycle = [int(x) for x in cycle]
    if len(cycle) < 3 or cycle[0] != cycle[-1]:
        raise NotACycle("a cycle must be closed and visit at least two states")
    body = cycle[:-1]
    if len(set(body)) != len(body):
        raise NotACycle("a cycle may not revisit a state")
    vals = np.zeros(graph.n_edges)
    for x, y in zip(cycle[:-1], cycle[1:]):
        eid, sign = graph.edge_of(x, y)
        if eid < 0:
            raise ArcMissing(f"({x}, {y}) is not an arc")
        vals[eid] += sign
    return Flow(graph, vals)


def _pinned_solve(K: sp.spmatrix, rhs: np.ndarray, pin: int) -> np.ndarray:
    """Solve a singular Laplacian system with the solution pinned to 0 at ``pin``."""
    n = K.shape[0]
    keep = np.flatnonzero(np.arange(n) != pin)
    Kr = sp.csc_matrix(K)[keep][:, keep]
    try:
        lu = splu(Kr.tocsc())
    except RuntimeError as exc:
        raise SingularSystem(f"Laplacian system is singular: {exc}") from exc
    out = np.zeros(rhs.shape)
    b = rhs[keep]
    x = lu.solve(b)
    x += lu.solve(b - Kr @ x)
    out[keep] = x
    return out


def project_gradient(phi: Flow, graph: ConductanceGraph | None = None, mu=None) -> tuple[np.ndarray, Flow]:
    """Split ``phi`` into its gradient part ``Psi_W`` and a divergence-free residual.

    ``W`` solves ``mu (S W) = -div phi`` and is returned with zero mean under
    ``mu`` (uniform when ``mu`` is omitted).
    """
    graph = phi.graph if graph is None else graph
    div = divergence(phi)
    W = _pinned_solve(graph.laplacian(), div, graph.n - 1)
    w = np.ones(graph.n) if mu is None else np.asarray(mu, dtype=float)
    W = W - np.dot(w, W) / w.sum()
    return W, phi - gradient_flow(W, graph)


def feasibility_residuals(phi: Flow, A, B) -> dict:
    """Divergence constraints of the two-set flow problem, as measured values."""
    div = divergence(phi)
    inner = np.ones(phi.graph.n, dtype=bool)
    inner[list(A)] = False
    inner[list(B)] = False
    return {
        "max_interior_divergence": float(np.max(np.abs(div[inner]), initial=0.0)),
        "sum_divergence_A": float(div[list(A)].sum()),
        "sum_divergence_B": float(div[list(B)].sum()),
    }


def project_feasible(phi: Flow, A, B, graph: ConductanceGraph | None = None) -> Flow:
    """Orthogonal projection onto flows feasible for the pair ``(A, B)``.

    Feasible flows are the orthogonal complement of gradients of functions
    constant on ``A`` and on ``B``.
    """
    graph = phi.graph if graph is None else graph
    n = graph.n
    A = np.asarray(sorted(A), dtype=np.int64)
    B = np.asarray(sorted(B), dtype=np.int64)
    group = np.arange(n)
    rest = np.ones(n, dtype=bool)
    rest[A] = rest[B] = False
    k = int(rest.sum())
    group[rest] = np.arange(k)
    group[A] = k
    group[B] = k + 1
    Pi = sp.csr_matrix((np.ones(n), (np.arange(n), group)), shape=(n, k + 2))
    K = (Pi.T @ graph.laplacian() @ Pi).tocsr()
    w = _pinned_solve(K, Pi.T @ divergence(phi), k + 1)
    return phi - gradient_flow(Pi @ w, graph)
