# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernel; same contract as the numpy fallback."""

import numpy as np

from libc.stdint cimport int8_t, int64_t, uint64_t
from libc.stdlib cimport calloc, free, malloc

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def run_trajectories(const int64_t[::1] indptr, const int64_t[::1] indices, const double[::1] cum,
                     const int8_t[::1] stop_code, const int64_t[::1] starts, const int64_t[::1] traj_ids,
                     seed, int64_t max_steps, edge_id=None, edge_sign=None, int64_t n_edges=0):
    cdef Py_ssize_t k = starts.shape[0]
    cdef Py_ssize_t i, m
    cdef uint64_t base = mix(<uint64_t>(int(seed) % 2**64))
    cdef uint64_t key
    cdef int64_t s, lo, hi, mid, step, e
    cdef double u
    cdef bint track = edge_id is not None
    cdef const int64_t[::1] eid
    cdef const int8_t[::1] esg
    hit_arr = np.zeros(k, dtype=np.int8)
    steps_arr = np.zeros(k, dtype=np.int64)
    sum_arr = np.zeros(n_edges if track else 0, dtype=np.int64)
    sq_arr = np.zeros(n_edges if track else 0, dtype=np.int64)
    cdef int8_t[::1] hit = hit_arr
    cdef int64_t[::1] nsteps = steps_arr
    cdef int64_t[::1] esum = sum_arr
    cdef int64_t[::1] esq = sq_arr
    cdef int64_t* cnt = NULL
    cdef int64_t* touched = NULL
    cdef char* seen = NULL
    cdef Py_ssize_t ntouched
    if track:
        eid = np.ascontiguousarray(edge_id, dtype=np.int64)
        esg = np.ascontiguousarray(edge_sign, dtype=np.int8)
        cnt = <int64_t*>calloc(n_edges + 1, sizeof(int64_t))
        touched = <int64_t*>malloc((n_edges + 1) * sizeof(int64_t))
        seen = <char*>calloc(n_edges + 1, sizeof(char))
        if cnt == NULL or touched == NULL or seen == NULL:
            free(cnt); free(touched); free(seen)
            raise MemoryError()
    try:
        with nogil:
            for i in range(k):
                key = mix(base + <uint64_t>(traj_ids[i] + 1) * GOLDEN)
                s = starts[i]
                step = 0
                ntouched = 0
                while step < max_steps:
                    u = <double>(mix(key + <uint64_t>(step + 1) * GOLDEN) >> 11) * 1.1102230246251565e-16
                    lo = indptr[s]
                    hi = indptr[s + 1] - 1
                    while lo < hi:
                        mid = (lo + hi) // 2
                        if u < cum[mid]:
                            hi = mid
                        else:
                            lo = mid + 1
                    if track:
                        e = eid[lo]
                        cnt[e] += esg[lo]
                        if not seen[e]:
                            seen[e] = 1
                            touched[ntouched] = e
                            ntouched += 1
                    s = indices[lo]
                    step += 1
                    if stop_code[s] != 0:
                        hit[i] = stop_code[s]
                        break
                nsteps[i] = step
                if track:
                    for m in range(ntouched):
                        e = touched[m]
                        esum[e] += cnt[e]
                        esq[e] += cnt[e] * cnt[e]
                        cnt[e] = 0
                        seen[e] = 0
    finally:
        free(cnt); free(touched); free(seen)
    return hit_arr, steps_arr, sum_arr, sq_arr
