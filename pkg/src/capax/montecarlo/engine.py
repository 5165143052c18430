"""Seeded simulation of the discrete skeleton as a statistical oracle."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..chain import ChainModel, adjoint, conductances, skeleton
from ..errors import StepCapExceeded, ValidationError
from ..flows.algebra import Flow
from ..potentials import as_index_array, harmonic_measure, validate_pair
from ._rng import START_STREAM, derived_seed, trajectory_keys, uniforms
from .backend import get_backend

Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``max_steps=None`` resolves to ``max(n * 10**4, n**2)`` for an
    ``n``-state chain.
    """

    seed: int
    samples: int
    max_steps: int | None = None
    threads: int | None = None
    backend: str | None = None

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValidationError("samples must be at least 1")

    def step_cap(self, n: int) -> int:
        if self.max_steps is None:
            return max(n * 10_000, n * n)
        if self.max_steps < n * n:
            raise ValidationError(f"max_steps must be at least n**2 = {n * n}")
        return int(self.max_steps)

    def workers(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("CAPAX_THREADS")
        if env:
            return max(1, int(env))
        return os.cpu_count() or 1


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width_95: float
    samples_used: int

    @property
    def std_error(self) -> float:
        return self.half_width_95 / Z95

    def covers(self, value: float, sigmas: float | None = None) -> bool:
        width = self.half_width_95 if sigmas is None else sigmas * self.std_error
        return abs(value - self.mean) <= width

    def to_dict(self) -> dict:
        return {"mean": self.mean, "half_width_95": self.half_width_95, "samples_used": self.samples_used}


def binomial_estimate(successes: int, n: int) -> Estimate:
    p = successes / n
    return Estimate(p, Z95 * float(np.sqrt(p * (1 - p) / n)), n)


@dataclass(frozen=True, eq=False)
class JumpTable:
    """CSR jump table with row-wise cumulative probabilities and arc ids."""

    indptr: np.ndarray
    indices: np.ndarray
    cum: np.ndarray
    edge_id: np.ndarray
    edge_sign: np.ndarray
    n_edges: int


def jump_table(chain: ChainModel) -> JumpTable:
    P, _ = skeleton(chain)
    P = P.tocsr()
    P.sort_indices()
    indptr = P.indptr.astype(np.int64)
    indices = P.indices.astype(np.int64)
    rows = np.repeat(np.arange(chain.n), np.diff(indptr))
    cum = np.cumsum(P.data)
    offset = np.concatenate(([0.0], cum[indptr[1:-1] - 1]))
    cum = cum - offset[rows]
    cum[indptr[1:] - 1] = 1.0
    g = conductances(chain)
    edge_id = (np.asarray(g.edge_lookup[rows, indices]).ravel() - 1).astype(np.int64)
    edge_sign = np.where(rows < indices, 1, -1).astype(np.int8)
    return JumpTable(indptr, indices, np.ascontiguousarray(cum), edge_id, edge_sign, g.n_edges)


def simulate(chain: ChainModel, stop_code, starts, traj_ids, cfg: SimConfig, track_edges: bool = False,
             table: JumpTable | None = None):
    """Run trajectories in deterministic chunks; raises if any hits the step cap."""
    table = jump_table(chain) if table is None else table
    _, kern = get_backend(cfg.backend)
    stop_code = np.ascontiguousarray(stop_code, dtype=np.int8)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    traj_ids = np.ascontiguousarray(traj_ids, dtype=np.int64)
    cap = cfg.step_cap(chain.n)
    k = starts.size
    chunk = 4096
    if track_edges and table.n_edges:
        chunk = int(max(1, min(chunk, 2 * 10**7 // table.n_edges)))
    bounds = [(i, min(i + chunk, k)) for i in range(0, k, chunk)]

    def work(b):
        lo, hi = b
        kw = {}
        if track_edges:
            kw = {"edge_id": table.edge_id, "edge_sign": table.edge_sign, "n_edges": table.n_edges}
        return kern.run_trajectories(table.indptr, table.indices, table.cum, stop_code,
                                     starts[lo:hi], traj_ids[lo:hi], int(cfg.seed), cap, **kw)

    nw = min(cfg.workers(), len(bounds))
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            parts = list(ex.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    hit = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    ne = table.n_edges if track_edges else 0
    esum = np.zeros(ne, dtype=np.int64)
    esq = np.zeros(ne, dtype=np.int64)
    for p in parts:
        if track_edges:
            esum += p[2]
            esq += p[3]
    capped = int(np.count_nonzero(hit == 0))
    if capped:
        raise StepCapExceeded(f"{capped} of {k} trajectories reached the step cap {cap}")
    return hit, steps, esum, esq


# ----------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class EscapeEstimate:
    states: np.ndarray
    per_state: tuple
    capacity: Estimate

    def to_dict(self, labels=None) -> dict:
        lab = (lambda i: labels[i]) if labels is not None else (lambda i: int(i))
        return {
            "escape": [{"state": lab(s), **e.to_dict()} for s, e in zip(self.states, self.per_state)],
            "capacity": self.capacity.to_dict(),
        }


def estimate_escape(chain: ChainModel, A, B, cfg: SimConfig) -> EscapeEstimate:
    """Estimate ``P_a[T_A^+ > T_B^+]`` for each ``a`` in ``A`` and the capacity."""
    A, B = validate_pair(chain, A, B)
    N = int(cfg.samples)
    code = np.zeros(chain.n, dtype=np.int8)
    code[A] = 1
    code[B] = 2
    starts = np.repeat(A, N)
    ids = np.arange(starts.size, dtype=np.int64)
    hit, _, _, _ = simulate(chain, code, starts, ids, cfg)
    wins = (hit == 2).reshape(A.size, N).sum(axis=1)
    per = tuple(binomial_estimate(int(w), N) for w in wins)
    p = wins / N
    M = chain.M[A]
    mean = float(np.dot(M, p))
    hw = Z95 * float(np.sqrt(np.sum(M**2 * p * (1 - p)) / N))
    return EscapeEstimate(states=A, per_state=per, capacity=Estimate(mean, hw, N * A.size))


def estimate_harmonic_measure(chain: ChainModel, A, B, cfg: SimConfig) -> np.ndarray:
    """Harmonic measure from normalized escape estimates (full-length vector)."""
    est = estimate_escape(chain, A, B, cfg)
    w = chain.M[est.states] * np.array([e.mean for e in est.per_state])
    nu = np.zeros(chain.n)
    nu[est.states] = w / w.sum()
    return nu


def estimate_hitting(chain: ChainModel, A, B, x: int, cfg: SimConfig) -> Estimate:
    """Estimate ``P_x[T_A < T_B]``."""
    A, B = validate_pair(chain, A, B)
    x = int(x)
    N = int(cfg.samples)
    if x in set(A.tolist()):
        return Estimate(1.0, 0.0, N)
    if x in set(B.tolist()):
        return Estimate(0.0, 0.0, N)
    code = np.zeros(chain.n, dtype=np.int8)
    code[A] = 1
    code[B] = 2
    hit, _, _, _ = simulate(chain, code, np.full(N, x), np.arange(N), cfg)
    return binomial_estimate(int(np.count_nonzero(hit == 1)), N)


def estimate_return(chain: ChainModel, x: int, B, cfg: SimConfig) -> Estimate:
    """Estimate ``P_x[T_x^+ > T_B]`` for a truncation with absorbing class ``B``."""
    B = as_index_array(chain, B, "B")
    x = int(x)
    if x in set(B.tolist()):
        raise ValidationError("x lies in the absorbing class")
    N = int(cfg.samples)
    code = np.zeros(chain.n, dtype=np.int8)
    code[B] = 2
    code[x] = 1
    hit, _, _, _ = simulate(chain, code, np.full(N, x), np.arange(N), cfg)
    return binomial_estimate(int(np.count_nonzero(hit == 2)), N)


def estimate_absorption_steps(chain: ChainModel, B, x: int, cfg: SimConfig) -> Estimate:
    """Estimate the expected number of jumps from ``x`` until ``B`` is entered."""
    B = as_index_array(chain, B, "B")
    N = int(cfg.samples)
    code = np.zeros(chain.n, dtype=np.int8)
    code[B] = 2
    _, steps, _, _ = simulate(chain, code, np.full(N, int(x)), np.arange(N), cfg)
    sd = float(np.std(steps, ddof=1)) if N > 1 else 0.0
    return Estimate(float(steps.mean()), Z95 * sd / np.sqrt(N), N)


@dataclass(frozen=True, eq=False)
class CurrentEstimate:
    """Mean net crossings per canonical edge and their standard errors."""

    mean: Flow
    std_error: np.ndarray
    samples_used: int

    def z_scores(self, exact: Flow) -> np.ndarray:
        diff = self.mean.values - exact.values
        z = np.zeros_like(diff)
        pos = self.std_error > 0
        z[pos] = diff[pos] / self.std_error[pos]
        z[~pos & (diff != 0)] = np.inf
        return z


def start_states(dist: np.ndarray, N: int, seed: int) -> np.ndarray:
    """``N`` states drawn from ``dist`` using a stream separate from the trajectories."""
    support = np.flatnonzero(dist > 0)
    cdf = np.cumsum(dist[support])
    cdf /= cdf[-1]
    u = uniforms(trajectory_keys(derived_seed(seed, START_STREAM), np.arange(N)), 0)
    pick = np.minimum(np.searchsorted(cdf, u, side="right"), support.size - 1)
    return support[pick]


def estimate_current(chain: ChainModel, A, B, cfg: SimConfig) -> CurrentEstimate:
    """Empirical net crossings per arc, starting from the adjoint harmonic measure, until ``B``."""
    A, B = validate_pair(chain, A, B)
    N = int(cfg.samples)
    nu_star = harmonic_measure(adjoint(chain), A, B)
    starts = start_states(nu_star, N, cfg.seed)
    code = np.zeros(chain.n, dtype=np.int8)
    code[B] = 2
    table = jump_table(chain)
    _, _, s1, s2 = simulate(chain, code, starts, np.arange(N), cfg, track_edges=True, table=table)
    mean = s1 / N
    var = (s2 - N * mean**2) / max(N - 1, 1)
    se = np.sqrt(np.maximum(var, 0.0) / N)
    return CurrentEstimate(Flow(conductances(chain), mean), se, N)
