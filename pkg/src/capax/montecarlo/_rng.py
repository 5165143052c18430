"""Counter-based SplitMix64 streams.

Trajectory ``t`` of a run seeded with ``seed`` uses the key
``mix(mix(seed) + (t + 1) * GOLDEN)``, and its ``k``-th uniform is
``mix(key + (k + 1) * GOLDEN) >> 11`` scaled by ``2**-53``. Every draw is a
pure function of ``(seed, t, k)``, so trajectories can be split across
workers in any order. All arithmetic is modulo ``2**64``.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(v) for v in (30, 27, 31, 11))
_SCALE = 2.0**-53

# fixed offset giving the stream that draws starting states
START_STREAM = 0x5DEECE66D


def mix(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def seed_word(seed: int) -> np.uint64:
    return np.uint64(int(seed) % 2**64)


def trajectory_keys(seed: int, traj_ids: np.ndarray) -> np.ndarray:
    t = np.asarray(traj_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix(mix(np.array([seed_word(seed)]))[0] + (t + np.uint64(1)) * GOLDEN)


def uniforms(keys: np.ndarray, k: int) -> np.ndarray:
    """The ``k``-th uniform of each stream, in ``[0, 1)``."""
    with np.errstate(over="ignore"):
        z = mix(keys + np.uint64(k + 1) * GOLDEN)
    return (z >> _S11).astype(np.float64) * _SCALE


def derived_seed(seed: int, offset: int) -> int:
    return int(mix(np.array([seed_word(seed) ^ np.uint64(offset)]))[0])
