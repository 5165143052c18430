"""Seeded chain generators used by tests, the benchmark and the examples."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .chain import ChainModel, build_chain, from_sparse


def random_chain(n: int, seed: int, density: float = 1.0) -> ChainModel:
    """Random irreducible, generally non-reversible chain.

    Each ordered pair carries a rate drawn from Uniform(0, 1] with probability
    ``density``; a random Hamiltonian cycle is always added so the chain is
    strongly connected.
    """
    rng = np.random.default_rng(seed)
    rates = 1.0 - rng.random((n, n))
    mask = rng.random((n, n)) < density
    perm = rng.permutation(n)
    mask[perm, np.roll(perm, -1)] = True
    np.fill_diagonal(mask, False)
    R = sp.csr_matrix(np.where(mask, rates, 0.0))
    return from_sparse(R)


def random_reversible_chain(n: int, seed: int, density: float = 1.0) -> ChainModel:
    """Random reversible chain: symmetric conductances over a random measure."""
    rng = np.random.default_rng(seed)
    w = 1.0 - rng.random((n, n))
    w = np.triu(w, 1)
    mask = np.triu(rng.random((n, n)) < density, 1)
    mask[np.arange(n - 1), np.arange(1, n)] = True
    w = np.where(mask, w, 0.0)
    w = w + w.T
    mu = 1.0 - rng.random(n)
    mu /= mu.sum()
    R = sp.csr_matrix(w / mu[:, None])
    return from_sparse(R, mu=mu)


def two_state(alpha: float = 1.0, beta: float = 2.0) -> ChainModel:
    return build_chain([(0, 1, alpha), (1, 0, beta)], labels=["s0", "s1"])


def one_way_cycle(n: int = 3, rate: float = 1.0) -> ChainModel:
    return build_chain([(i, (i + 1) % n, rate) for i in range(n)])


def birth_death(rates_up, rates_down) -> ChainModel:
    """Nearest-neighbour chain on ``0..len(rates_up)``."""
    triples = [(i, i + 1, u) for i, u in enumerate(rates_up)]
    triples += [(i + 1, i, d) for i, d in enumerate(rates_down)]
    return build_chain(triples)
