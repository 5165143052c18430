"""The min-max (Dirichlet) principle for non-reversible chains.

For a test function ``F`` equal to 1 on ``A`` and 0 on ``B`` the functional

    sup_H { 2 <L* F, H>_mu - <H, (-S) H>_mu },   H constant on A and on B,

bounds the capacity from above, with equality at ``F = (V + V*) / 2``. The
sets are collapsed to two points first, after which the supremum has the
closed form ``<g, (-S)^{-1} g>_mu`` with ``g = L* f``. In matrix form, with
``K_s`` the Laplacian of ``c_s`` (which equals ``diag(mu)(-S)``) and
``w = mu * g``, the value is ``w . h`` where ``K_s h = w``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .chain import ChainModel, adjoint, conductances, symmetrize
from .collapse import collapse_pair
from .config import TOL
from .errors import BadBoundary, BoundViolated, SingularSystem, ZeroAtX
from .potentials import (
    as_index_array,
    capacity_prob,
    equilibrium_potential,
    green_diagonal,
    validate_pair,
)


def _solve_pinned(K: sp.spmatrix, W: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Solve ``K h = W`` over the ``keep`` indices with ``h = 0`` elsewhere.

    ``W`` may be a vector or an ``(n, k)`` matrix of right-hand sides.
    """
    Kr = sp.csc_matrix(K)[keep][:, keep].tocsc()
    try:
        lu = splu(Kr)
    except RuntimeError as exc:
        raise SingularSystem(f"symmetric-part system is singular: {exc}") from exc
    b = W[keep]
    h = lu.solve(b)
    h += lu.solve(b - Kr @ h)
    out = np.zeros(W.shape)
    out[keep] = h
    return out


def _check_mean_zero(W: np.ndarray) -> None:
    tot = np.abs(W.sum(axis=0))
    scale = np.abs(W).sum(axis=0)
    bad = tot > TOL.mean_zero * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad & (scale > 0)):
        raise SingularSystem("adjoint image is not mu-mean-zero; mu is not stationary")


def dirichlet_functional(chain: ChainModel, A, B, F, pin: str = "b", atol: float = 0.0):
    """Min-max functional at test function(s) ``F``.

    Parameters
    ----------
    chain : ChainModel
    A, B : iterable of int
        Disjoint nonempty state sets.
    F : array_like
        Test function with ``F = 1`` on ``A`` and ``F = 0`` on ``B``, either
        one vector of length ``n`` or a ``(k, n)`` batch.
    pin : {"b", "mean"}
        Normalization of the potential ``h``: ``h(b) = 0`` or ``mu``-mean
        zero. The value does not depend on it.
    atol : float
        Tolerance for the boundary constraints on ``F``.

    Returns
    -------
    float or numpy.ndarray
        The functional value, one per test function in a batch.
    """
    A, B = validate_pair(chain, A, B)
    F = np.asarray(F, dtype=float)
    single = F.ndim == 1
    F2 = np.atleast_2d(F)
    if F2.shape[1] != chain.n:
        raise BadBoundary("test function has the wrong length")
    if np.any(np.abs(F2[:, A] - 1.0) > atol) or np.any(np.abs(F2[:, B]) > atol):
        raise BadBoundary("test function must equal 1 on A and 0 on B")
    bar, cmap = collapse_pair(chain, A, B)
    f = cmap.push(F2, atol=atol)
    f[:, cmap.fresh_states[0]] = 1.0
    f[:, cmap.fresh_states[1]] = 0.0
    adj = adjoint(bar)
    G = (adj.rates @ f.T) - adj.holding[:, None] * f.T  # columns are L* f
    W = bar.mu[:, None] * G
    _check_mean_zero(W)
    K = conductances(bar).laplacian()
    b = cmap.fresh_states[1]
    keep = np.flatnonzero(np.arange(bar.n) != b)
    H = _solve_pinned(K, W, keep)
    if pin == "mean":
        H = H - (bar.mu @ H) / bar.mu.sum()
    elif pin != "b":
        raise ValueError("pin must be 'b' or 'mean'")
    vals = np.einsum("ij,ij->j", W, H)
    vals = np.maximum(vals, 0.0)
    return float(vals[0]) if single else vals


def dirichlet_form(chain: ChainModel, F) -> np.ndarray:
    """``<(-L) F, F>_mu = sum over edges c_s (F(x) - F(y))^2`` (batched)."""
    g = conductances(chain)
    F2 = np.atleast_2d(np.asarray(F, dtype=float))
    d = F2[:, g.tail] - F2[:, g.head]
    out = (d * d) @ g.cs
    return float(out[0]) if np.ndim(F) == 1 else out


def capacity_minmax(chain: ChainModel, A, B) -> float:
    """Min-max functional at its optimizer ``(V + V*) / 2``."""
    sol = equilibrium_potential(chain, A, B)
    return dirichlet_functional(chain, sol.A, sol.B, sol.F)


# ----------------------------------------------------------------------------
# sector condition


def _top_singular_value(Bm: np.ndarray, rtol: float = 1e-12, max_iter: int = 10_000) -> tuple[float, bool]:
    """Power iteration on ``B^T B``; returns ``(sigma, converged)``."""
    k = Bm.shape[0]
    if k == 0 or not np.any(Bm):
        return 0.0, True
    v = np.random.default_rng(0).standard_normal(k)
    v /= np.linalg.norm(v)
    BtB = Bm.T @ Bm
    est = 0.0
    for _ in range(max_iter):
        u = BtB @ v
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0, True
        v = u / new
        if abs(new - est) <= rtol * new:
            return float(np.sqrt(new)), True
        est = new
    return float(np.sqrt(est)), False


def sector_matrix(chain: ChainModel) -> np.ndarray:
    """``Lambda^{-1/2} U^T K_a U Lambda^{-1/2}`` on the non-constant eigenspace of ``K_s``."""
    g = conductances(chain)
    Ks = g.laplacian().toarray()
    Ka = g.c_a.toarray()
    lam, U = np.linalg.eigh(Ks)
    # drop the constant direction (smallest eigenvalue; the chain is irreducible)
    lam, U = lam[1:], U[:, 1:]
    if lam.size and lam.min() <= 0:
        raise SingularSystem("symmetric part has a degenerate kernel")
    s = 1.0 / np.sqrt(lam)
    return (U.T @ Ka @ U) * s[:, None] * s[None, :]


def sector_constant(chain: ChainModel, return_info: bool = False):
    """Sector constant ``C_0 = (1 + sigma_max)^2``.

    Guarantees ``<Lf, g>_mu^2 <= C_0 <(-L)f, f>_mu <(-L)g, g>_mu``. It is an
    upper bound, not the optimal constant (``1 + sigma_max^2`` is already
    valid).
    """
    Bm = sector_matrix(chain)
    sigma, converged = _top_singular_value(Bm)
    if not converged:
        sigma = float(np.linalg.norm(Bm, 2))
    C0 = (1.0 + sigma) ** 2
    if return_info:
        return C0, {"sigma_max": sigma, "power_iteration_converged": converged}
    return C0


def sector_ratio(chain: ChainModel, f, g) -> np.ndarray:
    """``<Lf, g>_mu^2 / (D(f) D(g))`` for batches of pairs (rows)."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    g = np.atleast_2d(np.asarray(g, dtype=float))
    Lf = (chain.rates @ f.T - chain.holding[:, None] * f.T).T
    num = np.einsum("ij,ij->i", Lf * chain.mu, g) ** 2
    return num / (dirichlet_form(chain, f) * dirichlet_form(chain, g))


def capacity_bounds_check(chain: ChainModel, A, B, C0: float | None = None) -> tuple[float, float, float]:
    """``(Cap^s, Cap, C_0 Cap^s)``; raises :class:`BoundViolated` unless sorted."""
    A, B = validate_pair(chain, A, B)
    cap_s = capacity_prob(symmetrize(chain), A, B)
    cap = capacity_prob(chain, A, B)
    if C0 is None:
        C0 = sector_constant(chain)
    upper = C0 * cap_s
    slack = TOL.bound_slack
    if cap_s > cap * (1 + slack):
        raise BoundViolated(f"symmetrized capacity {cap_s!r} exceeds capacity {cap!r}")
    if cap > upper * (1 + slack):
        raise BoundViolated(f"capacity {cap!r} exceeds sector bound {upper!r}")
    return cap_s, cap, upper


# ----------------------------------------------------------------------------
# pointwise bound on a truncation


def pointwise_sup(chain: ChainModel, f, B) -> float:
    """``sup_H {2 <L* f, H>_mu - <H, (-S)H>_mu}`` over ``H`` vanishing on ``B``."""
    B = as_index_array(chain, B, "B")
    f = np.asarray(f, dtype=float)
    adj = adjoint(chain)
    w = chain.mu * adj.apply(f)
    keep = np.ones(chain.n, dtype=bool)
    keep[B] = False
    h = _solve_pinned(conductances(chain).laplacian(), w, np.flatnonzero(keep))
    return max(float(w @ h), 0.0)


def pointwise_bound_check(chain: ChainModel, f, x: int, B) -> tuple[float, float]:
    """``(mu(x) f(x)^2, G(x, x) * sup_H {...})``; raises unless ``lhs <= rhs``.

    ``B`` is the absorbing class of the truncation (its collapsed exterior)
    and ``G`` is the time-integrated Green function killed at ``B``.
    """
    B = as_index_array(chain, B, "B")
    f = np.asarray(f, dtype=float)
    x = int(x)
    if f[x] == 0:
        raise ZeroAtX("test function vanishes at x")
    if np.any(f[B] != 0):
        raise BadBoundary("test function must vanish on the absorbing class")
    lhs = float(chain.mu[x] * f[x] ** 2)
    rhs = green_diagonal(chain, B, x) * pointwise_sup(chain, f, B)
    if lhs > rhs * (1 + TOL.bound_slack):
        raise BoundViolated(f"pointwise bound fails: {lhs!r} > {rhs!r}")
    return lhs, rhs
