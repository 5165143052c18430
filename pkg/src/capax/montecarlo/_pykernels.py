"""Vectorized numpy implementation of the trajectory kernel.

All trajectories of a batch advance in lockstep. The jump rule and the
random streams match the compiled kernel exactly, so both backends return
identical integer statistics.
"""

import numpy as np

from ._rng import trajectory_keys, uniforms


def run_trajectories(indptr, indices, cum, stop_code, starts, traj_ids, seed, max_steps,
                     edge_id=None, edge_sign=None, n_edges=0):
    """Run skeleton trajectories until they enter a state with nonzero stop code.

    Returns
    -------
    hit : int8 array
        Stop code of the final state, or 0 for trajectories cut at ``max_steps``.
    steps : int64 array
        Number of jumps taken.
    edge_sum, edge_sumsq : int64 arrays
        Per-edge sums over trajectories of the net crossing count and of its
        square (empty unless ``edge_id`` is given).
    """
    starts = np.asarray(starts, dtype=np.int64)
    k = starts.size
    keys = trajectory_keys(seed, traj_ids)
    state = starts.copy()
    hit = np.zeros(k, dtype=np.int8)
    steps = np.zeros(k, dtype=np.int64)
    active = np.arange(k)
    track = edge_id is not None
    counts = np.zeros((k, n_edges), dtype=np.int64) if track else None
    step = 0
    while active.size and step < max_steps:
        s = state[active]
        u = uniforms(keys[active], step)
        lo = indptr[s].copy()
        hi = indptr[s + 1] - 1
        open_ = lo < hi
        while open_.any():
            mid = (lo + hi) // 2
            go = u < cum[mid]
            hi = np.where(open_ & go, mid, hi)
            lo = np.where(open_ & ~go, mid + 1, lo)
            open_ = lo < hi
        nxt = indices[lo]
        if track:
            np.add.at(counts, (active, edge_id[lo]), edge_sign[lo])
        state[active] = nxt
        step += 1
        code = stop_code[nxt]
        done = code != 0
        finished = active[done]
        hit[finished] = code[done]
        steps[finished] = step
        active = active[~done]
    steps[active] = step
    if track:
        edge_sum = counts.sum(axis=0)
        edge_sumsq = (counts * counts).sum(axis=0)
    else:
        edge_sum = edge_sumsq = np.zeros(0, dtype=np.int64)
    return hit, steps, edge_sum, edge_sumsq
