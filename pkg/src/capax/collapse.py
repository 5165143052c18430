"""Collapsing state subsets to single points.

Two flavours are provided. :func:`collapse_set` / :func:`collapse_pair` merge
subsets of a finite chain and give the fresh point the mass ``mu(A)``.
:func:`collapse_exterior` merges the (possibly infinite) exterior of a finite
box of a locally finite chain family and gives the fresh point mass one.
The two conventions are kept as they are and never mixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import islice
from typing import Hashable, Iterable, Protocol, Sequence

import numpy as np
import scipy.sparse as sp

from .chain import ChainModel, from_sparse
from .errors import BadBoundary, EmptySet, NonLocalRates, NotProperSubset, SetsIntersect


@dataclass(frozen=True, eq=False)
class CollapseMap:
    """Correspondence between a parent chain and its collapsed version."""

    parent: ChainModel
    collapsed_sets: tuple
    fresh_states: tuple
    index_map: np.ndarray

    def lift(self, f: np.ndarray) -> np.ndarray:
        """Parent function equal to ``f`` off the sets and ``f(fresh)`` on each set."""
        return np.asarray(f, dtype=float)[..., self.index_map]

    def push(self, F: np.ndarray, atol: float = 0.0) -> np.ndarray:
        """Collapsed function of a parent function constant on every collapsed set."""
        F = np.asarray(F, dtype=float)
        m = int(self.index_map.max()) + 1
        f = np.empty(F.shape[:-1] + (m,))
        f[..., self.index_map] = F
        for s, d in zip(self.collapsed_sets, self.fresh_states):
            vals = F[..., s]
            if np.any(np.abs(vals - vals[..., :1]) > atol):
                raise BadBoundary("function is not constant on a collapsed set")
            f[..., d] = vals[..., 0]
        return f


def _as_index_set(chain: ChainModel, A) -> np.ndarray:
    idx = np.unique(np.asarray(list(A), dtype=np.int64))
    if idx.size == 0:
        raise EmptySet("collapsed set is empty")
    if idx.min() < 0 or idx.max() >= chain.n:
        raise NotProperSubset("collapsed set contains indices outside the state space")
    return idx


def _collapse(chain: ChainModel, groups: list[np.ndarray], fresh_labels: Sequence) -> tuple[ChainModel, CollapseMap]:
    n = chain.n
    member = np.full(n, -1, dtype=np.int64)
    for gi, g in enumerate(groups):
        if np.any(member[g] >= 0):
            raise SetsIntersect("collapsed sets must be disjoint")
        member[g] = gi
    rest = np.flatnonzero(member < 0)
    k = rest.size
    m = k + len(groups)
    if m < 2:
        raise NotProperSubset("collapsing would leave fewer than two states")
    index_map = np.empty(n, dtype=np.int64)
    index_map[rest] = np.arange(k)
    index_map[member >= 0] = k + member[member >= 0]
    fresh = tuple(range(k, m))

    mu_bar = np.bincount(index_map, weights=chain.mu, minlength=m)
    R = chain.rates.tocoo()
    gx = index_map[R.row]
    gy = index_map[R.col]
    keep = gx != gy
    from_fresh = member[R.row] >= 0
    # regular rows keep their rates verbatim; fresh rows average mu-weighted rates
    vals = np.where(from_fresh, chain.mu[R.row] * R.data, R.data)[keep]
    gx, gy = gx[keep], gy[keep]
    keys, inv = np.unique(gx * m + gy, return_inverse=True)
    agg = np.bincount(inv, weights=vals)
    rows, cols = keys // m, keys % m
    agg = np.where(rows >= k, agg / mu_bar[rows], agg)
    Rbar = sp.csr_matrix((agg, (rows, cols)), shape=(m, m))

    labels = [chain.labels[i] for i in rest] + list(fresh_labels)
    bar = from_sparse(Rbar, mu=mu_bar, labels=labels, normalized=chain.normalized)
    cmap = CollapseMap(parent=chain, collapsed_sets=tuple(groups), fresh_states=fresh, index_map=index_map)
    return bar, cmap


def collapse_set(chain: ChainModel, A: Iterable[int], label: Hashable = "@d") -> tuple[ChainModel, CollapseMap]:
    """Collapse ``A`` to a single point appended after the remaining states."""
    A = _as_index_set(chain, A)
    if A.size == chain.n:
        raise NotProperSubset("cannot collapse the whole state space")
    return _collapse(chain, [A], [label])


def collapse_pair(
    chain: ChainModel, A: Iterable[int], B: Iterable[int], labels: tuple = ("@A", "@B")
) -> tuple[ChainModel, CollapseMap]:
    """Collapse disjoint ``A`` and ``B`` simultaneously to points ``a`` and ``b``.

    The result does not depend on which set is named first, up to the order of
    the two fresh states.
    """
    A = _as_index_set(chain, A)
    B = _as_index_set(chain, B)
    if np.intersect1d(A, B).size:
        raise SetsIntersect("A and B must be disjoint")
    return _collapse(chain, [A, B], list(labels))


# ----------------------------------------------------------------------------
# exterior collapse of locally finite chain families


class ChainFamily(Protocol):
    """Locally finite chain on a countable state space.

    ``neighbors(x)`` must list every ``y`` with ``r(x,y) > 0`` or
    ``r(y,x) > 0``; ``mu`` must be stationary.
    """

    def mu(self, x) -> float: ...

    def neighbors(self, x) -> Iterable: ...

    def rate(self, x, y) -> float: ...


class FiniteFamily:
    """View a finite :class:`ChainModel` as a chain family over its indices."""

    def __init__(self, chain: ChainModel):
        self.chain = chain
        self._adj = (chain.rates + chain.rates.T).tocsr()

    def mu(self, x) -> float:
        return float(self.chain.mu[x])

    def neighbors(self, x):
        return self._adj.indices[self._adj.indptr[x]:self._adj.indptr[x + 1]].tolist()

    def rate(self, x, y) -> float:
        return float(self.chain.rates[x, y])


def collapse_exterior(
    family: ChainFamily, box: Sequence, label: Hashable = "@d", max_degree: int = 100_000
) -> ChainModel:
    """Finite chain on ``box`` plus one point standing for everything outside.

    The fresh point gets mass one and rates ``sum_y mu(y) r(y, x)`` over the
    exterior neighbours ``y`` of each box state ``x``.
    """
    box = list(box)
    if not box:
        raise EmptySet("box is empty")
    index = {x: i for i, x in enumerate(box)}
    if len(index) != len(box):
        raise BadBoundary("box lists a state twice")
    d = len(box)
    rows, cols, vals = [], [], []
    out_d = np.zeros(d)
    in_d = np.zeros(d)
    for x, i in index.items():
        nbrs = list(islice(family.neighbors(x), max_degree + 1))
        if len(nbrs) > max_degree:
            raise NonLocalRates(f"state {x!r} has more than {max_degree} neighbours")
        for y in nbrs:
            j = index.get(y)
            r = family.rate(x, y)
            if j is not None:
                if r > 0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(r)
            else:
                out_d[i] += r
                in_d[i] += family.mu(y) * family.rate(y, x)
    hit = np.flatnonzero(out_d > 0)
    back = np.flatnonzero(in_d > 0)
    rows += hit.tolist() + [d] * back.size
    cols += [d] * hit.size + back.tolist()
    vals += out_d[hit].tolist() + in_d[back].tolist()
    R = sp.csr_matrix((vals, (rows, cols)), shape=(d + 1, d + 1))
    mu = np.array([family.mu(x) for x in box] + [1.0])
    return from_sparse(R, mu=mu, labels=box + [label], normalized=False)
