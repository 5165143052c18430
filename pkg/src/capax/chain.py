"""Finite continuous-time Markov chains and their derived objects.

A :class:`ChainModel` stores off-diagonal jump rates as a CSR matrix together
with a stationary measure. Everything else (holding rates, generator,
adjoint, symmetric part, conductances, discrete skeleton) is derived from
those two arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .config import TOL
from .errors import (
    NegativeRate,
    NotIrreducible,
    NotStationary,
    SingularSystem,
    UnknownLabel,
    ValidationError,
)


def label_str(label: Hashable) -> str:
    """External string form of a state label; tuples print as ``(i,j)``."""
    if isinstance(label, tuple):
        return "(" + ",".join(str(v) for v in label) + ")"
    return str(label)


def _canonical(R: sp.spmatrix) -> sp.csr_matrix:
    R = sp.csr_matrix(R, dtype=float)
    R.setdiag(0.0)
    R.eliminate_zeros()
    R.sum_duplicates()
    R.sort_indices()
    return R


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ChainModel:
    """Irreducible finite chain with a stationary measure.

    Attributes
    ----------
    rates : scipy.sparse.csr_matrix
        Off-diagonal jump rates ``r(x, y)``; zero rates are not stored.
    mu : numpy.ndarray
        Strictly positive stationary measure.
    labels : tuple
        External label of each state index.
    normalized : bool
        True when ``mu`` sums to one.
    """

    rates: sp.csr_matrix
    mu: np.ndarray
    labels: tuple
    normalized: bool = True

    @property
    def n(self) -> int:
        return self.rates.shape[0]

    @cached_property
    def holding(self) -> np.ndarray:
        return _frozen(np.asarray(self.rates.sum(axis=1)).ravel())

    @cached_property
    def M(self) -> np.ndarray:
        """Stationary measure of the skeleton, ``mu * holding``."""
        return _frozen(self.mu * self.holding)

    @cached_property
    def _index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def generator(self) -> sp.csr_matrix:
        """Rate matrix ``Q`` with diagonal ``-holding``."""
        return (self.rates - sp.diags(self.holding)).tocsr()

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``(L f)(x) = sum_y r(x, y) [f(y) - f(x)]``."""
        f = np.asarray(f, dtype=float)
        return self.rates @ f - self.holding * f

    def index_of(self, label) -> int:
        idx = self._index
        if label in idx:
            return idx[label]
        if isinstance(label, str):
            text = label.strip()
            if text.startswith("(") and text.endswith(")"):
                try:
                    key = tuple(int(v) for v in text[1:-1].split(","))
                except ValueError:
                    key = None
                if key is not None:
                    if key in idx:
                        return idx[key]
                    # coordinates read back from a file are plain strings
                    text = label_str(key)
                    if text in idx:
                        return idx[text]
            for lab, i in idx.items():
                if label_str(lab) == text:
                    return i
        raise UnknownLabel(f"unknown state label {label!r}")

    def indices(self, labels: Iterable) -> np.ndarray:
        return np.array(sorted({self.index_of(lab) for lab in labels}), dtype=np.int64)

    def with_mu(self, mu: np.ndarray, normalized: bool = False) -> "ChainModel":
        return from_sparse(self.rates, mu=mu, labels=self.labels, normalized=normalized)


# ----------------------------------------------------------------------------
# construction


def _balance_solve(R: sp.csr_matrix, lam: np.ndarray, pivot: int) -> np.ndarray:
    n = R.shape[0]
    A = (R.T - sp.diags(lam)).tolil()
    A[pivot, :] = np.ones(n)
    A = A.tocsc()
    rhs = np.zeros(n)
    rhs[pivot] = 1.0
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SingularSystem(f"stationary system is singular: {exc}") from exc
    mu = lu.solve(rhs)
    mu += lu.solve(rhs - A @ mu)
    return mu


def stationary_measure(rates: sp.spmatrix) -> np.ndarray:
    """Normalized stationary measure of an irreducible rate matrix.

    Solves ``mu Q = 0`` by a direct sparse factorization of ``Q^T`` with one
    balance equation replaced by the normalization constraint, followed by
    one step of iterative refinement. The dropped equation is that of the
    heaviest state, found by a first solve; keeping the balance equations of
    light states preserves their relative accuracy when masses span many
    orders of magnitude.
    """
    R = _canonical(rates)
    n = R.shape[0]
    lam = np.asarray(R.sum(axis=1)).ravel()
    mu = _balance_solve(R, lam, n - 1)
    heavy = int(np.argmax(mu))
    if heavy != n - 1:
        mu = _balance_solve(R, lam, heavy)
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise SingularSystem("stationary solve produced a non-positive measure")
    return mu / mu.sum()


def stationarity_residual(rates: sp.spmatrix, mu: np.ndarray) -> float:
    """Largest relative violation of ``sum_x mu(x) r(x,y) = mu(y) lambda(y)``."""
    R = sp.csr_matrix(rates)
    out = mu * np.asarray(R.sum(axis=1)).ravel()
    inflow = R.T @ mu
    scale = np.maximum(out, inflow)
    return float(np.max(np.abs(inflow - out) / scale))


def from_sparse(
    rates: sp.spmatrix,
    mu: np.ndarray | None = None,
    labels: Sequence | None = None,
    normalized: bool | None = None,
    check: bool = True,
) -> ChainModel:
    """Build a chain from a sparse rate matrix, validating all invariants."""
    R = _canonical(rates)
    n = R.shape[0]
    if R.shape != (n, n) or n < 2:
        raise ValidationError("rate matrix must be square with at least two states")
    if R.nnz and R.data.min() < 0:
        raise NegativeRate("jump rates must be non-negative")
    if check:
        ncomp, _ = connected_components(R, directed=True, connection="strong")
        if ncomp != 1:
            raise NotIrreducible(f"rate graph has {ncomp} strongly connected components")
    if mu is None:
        mu = stationary_measure(R)
        normalized = True
    else:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (n,) or np.any(~np.isfinite(mu)) or np.any(mu <= 0):
            raise ValidationError("mu must be a strictly positive vector of length n")
        if normalized is None:
            normalized = bool(abs(mu.sum() - 1.0) <= 1e-12)
    if check:
        res = stationarity_residual(R, mu)
        if res > TOL.stationarity:
            raise NotStationary(f"mu fails the balance equations (relative residual {res:.3e})")
    if labels is None:
        labels = tuple(range(n))
    labels = tuple(labels)
    if len(labels) != n or len(set(labels)) != n:
        raise ValidationError("labels must be distinct, one per state")
    R.data.flags.writeable = False
    return ChainModel(rates=R, mu=_frozen(mu), labels=labels, normalized=bool(normalized))


def build_chain(
    rate_triples: Iterable[tuple[int, int, float]],
    mu: Sequence[float] | None = None,
    n: int | None = None,
    labels: Sequence | None = None,
) -> ChainModel:
    """Chain from ``(x, y, rate)`` triples over integer states ``0..n-1``.

    Duplicate triples are summed. When ``mu`` is omitted the stationary
    measure is computed and normalized.
    """
    triples = list(rate_triples)
    rows = np.array([t[0] for t in triples], dtype=np.int64)
    cols = np.array([t[1] for t in triples], dtype=np.int64)
    vals = np.array([t[2] for t in triples], dtype=float)
    if np.any(vals < 0):
        raise NegativeRate("jump rates must be non-negative")
    if np.any((rows == cols) & (vals != 0)):
        raise ValidationError("self-loop rates are not allowed")
    if n is None:
        n = int(max(rows.max(initial=-1), cols.max(initial=-1))) + 1
        if labels is not None:
            n = max(n, len(labels))
        if mu is not None:
            n = max(n, len(mu))
    R = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    return from_sparse(R, mu=None if mu is None else np.asarray(mu, float), labels=labels)


# ----------------------------------------------------------------------------
# derived chains


def adjoint(chain: ChainModel) -> ChainModel:
    """Time-reversed chain, ``r*(y, x) = mu(x) r(x, y) / mu(y)``."""
    mu = chain.mu
    C = chain.rates.multiply(mu[:, None]).tocsr()
    Rstar = C.T.tocsr().multiply(1.0 / mu[:, None]).tocsr()
    return from_sparse(Rstar, mu=mu, labels=chain.labels, normalized=chain.normalized)


def symmetrize(chain: ChainModel) -> ChainModel:
    """Reversible chain with rates ``(r + r*) / 2``."""
    Rstar = adjoint(chain).rates
    Rs = (chain.rates + Rstar) * 0.5
    return from_sparse(Rs, mu=chain.mu, labels=chain.labels, normalized=chain.normalized)


def skeleton(chain: ChainModel) -> tuple[sp.csr_matrix, np.ndarray]:
    """Jump matrix ``p(x,y) = r(x,y)/lambda(x)`` and its stationary measure ``M``."""
    P = sp.diags(1.0 / chain.holding) @ chain.rates
    return P.tocsr(), chain.M


def is_reversible(chain: ChainModel, rtol: float = 1e-12) -> bool:
    C = chain.rates.multiply(chain.mu[:, None]).tocsr()
    diff = abs(C - C.T)
    return diff.nnz == 0 or diff.max() <= rtol * abs(C).max()


# ----------------------------------------------------------------------------
# conductances


@dataclass(frozen=True, eq=False)
class ConductanceGraph:
    """Arc-indexed conductances of a chain.

    Matrices ``c``, ``c_star``, ``c_s``, ``c_a`` are sparse n-by-n. The arc set
    is stored once per unordered pair as canonical edges ``tail < head`` with
    per-edge arrays ``c_fwd = c(tail, head)``, ``c_bwd = c(head, tail)``,
    ``cs`` and ``ca = c_a(tail, head)``.
    """

    n: int
    c: sp.csr_matrix
    c_star: sp.csr_matrix
    c_s: sp.csr_matrix
    c_a: sp.csr_matrix
    tail: np.ndarray
    head: np.ndarray
    c_fwd: np.ndarray
    c_bwd: np.ndarray
    cs: np.ndarray
    ca: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.tail.shape[0]

    @cached_property
    def edge_lookup(self) -> sp.csr_matrix:
        """Sparse matrix holding ``edge id + 1`` at both orientations."""
        ids = np.arange(1, self.n_edges + 1, dtype=float)
        m = sp.coo_matrix((ids, (self.tail, self.head)), shape=(self.n, self.n))
        return (m + m.T).tocsr()

    def edge_of(self, x: int, y: int) -> tuple[int, int]:
        """Return ``(edge id, sign)`` of arc ``(x, y)``; id is -1 when absent."""
        eid = int(self.edge_lookup[x, y]) - 1
        return eid, (1 if x < y else -1)

    def laplacian(self) -> sp.csr_matrix:
        """Weighted Laplacian of ``c_s``; equals ``diag(mu)(-S)``."""
        deg = np.asarray(self.c_s.sum(axis=1)).ravel()
        return (sp.diags(deg) - self.c_s).tocsr()

    def adjoint(self) -> "ConductanceGraph":
        """Conductances of the time-reversed chain on the same edge arrays."""
        return ConductanceGraph(
            n=self.n, c=self.c_star, c_star=self.c, c_s=self.c_s, c_a=(-self.c_a).tocsr(),
            tail=self.tail, head=self.head, c_fwd=self.c_bwd, c_bwd=self.c_fwd,
            cs=self.cs, ca=_frozen(-self.ca),
        )


def conductances(chain: ChainModel) -> ConductanceGraph:
    mu = chain.mu
    c = chain.rates.multiply(mu[:, None]).tocsr()
    c.sort_indices()
    c_star = c.T.tocsr()
    c_star.sort_indices()
    c_s = ((c + c_star) * 0.5).tocsr()
    c_a = ((c - c_star) * 0.5).tocsr()
    c_a.eliminate_zeros()
    up = sp.triu(c_s, k=1).tocoo()
    order = np.lexsort((up.col, up.row))
    tail = up.row[order].astype(np.int64)
    head = up.col[order].astype(np.int64)
    c_fwd = np.asarray(c[tail, head]).ravel()
    c_bwd = np.asarray(c[head, tail]).ravel()
    cs = np.asarray(up.data[order], dtype=float)
    ca = 0.5 * (c_fwd - c_bwd)
    for a in (tail, head):
        a.flags.writeable = False
    return ConductanceGraph(
        n=chain.n, c=c, c_star=c_star, c_s=c_s, c_a=c_a, tail=tail, head=head,
        c_fwd=_frozen(c_fwd), c_bwd=_frozen(c_bwd), cs=_frozen(cs), ca=_frozen(ca),
    )


def conductance_violations(g: ConductanceGraph) -> dict:
    """Measured deviation for each conductance invariant (all should be ~0)."""
    asym = abs(g.c - g.c_star.T)
    div = np.asarray(g.c_a.sum(axis=1)).ravel()
    scale = np.maximum(np.asarray(g.c_s.sum(axis=1)).ravel(), np.finfo(float).tiny)
    return {
        "c_vs_cstar_transpose": float(asym.max()) if asym.nnz else 0.0,
        "cs_symmetry": float(abs(g.c_s - g.c_s.T).max()) if g.c_s.nnz else 0.0,
        "ca_antisymmetry": float(abs(g.c_a + g.c_a.T).max()) if g.c_a.nnz else 0.0,
        "ca_exceeds_cs": float(np.max(np.abs(g.ca) - g.cs, initial=0.0)),
        "ca_divergence": float(np.max(np.abs(div) / scale)),
    }
