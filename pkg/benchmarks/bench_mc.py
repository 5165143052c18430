"""Compare the compiled and numpy trajectory kernels.

Usage: ``python3 benchmarks/bench_mc.py [--samples N] [--repeat R]``

Both backends consume the same counter-based random stream, so the script
also checks that their outputs agree bit for bit.
"""

import argparse
import time

import numpy as np

from capax.generators import random_chain
from capax.montecarlo import SimConfig, available_backends, simulate


def setup(n, k, seed):
    chain = random_chain(n, seed, min(1.0, 6.0 / n))
    code = np.zeros(n, dtype=np.int8)
    code[0], code[n - 1] = 1, 2
    starts = np.random.default_rng(seed).integers(1, n - 1, size=k)
    return chain, code, starts, np.arange(k, dtype=np.int64)


def bench(chain, code, starts, ids, backend, track, repeat):
    cfg = SimConfig(seed=1, samples=len(starts), backend=backend, threads=1)
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = simulate(chain, code, starts, ids, cfg, track_edges=track)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernel not available; only the numpy fallback is installed")
    print(f"{'n':>5} {'edges':>6} " + " ".join(f"{b + ' s':>12}" for b in backends) + f" {'speedup':>8} identical")
    for n, track in ((10, False), (50, False), (200, False), (50, True)):
        chain, code, starts, ids = setup(n, args.samples, seed=n)
        res = {b: bench(chain, code, starts, ids, b, track, args.repeat) for b in backends}
        times = " ".join(f"{res[b][0]:12.4f}" for b in backends)
        if len(backends) == 2:
            same = all(np.array_equal(x, y) for x, y in zip(res["python"][1], res["compiled"][1]))
            speed = f"{res['python'][0] / res['compiled'][0]:8.1f}"
        else:
            same, speed = "-", "-"
        print(f"{n:>5} {'yes' if track else 'no':>6} {times} {speed:>8} {same}")
    print("edges: per-arc traversal counts recorded (used by current estimates)")


if __name__ == "__main__":
    main()
