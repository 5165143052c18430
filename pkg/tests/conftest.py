import sys

import numpy as np
import pytest

from capax.generators import one_way_cycle, random_chain, random_reversible_chain, two_state


def random_pair(n, rng, max_size=None):
    """Random disjoint nonempty (A, B) as sorted index lists."""
    max_size = max(1, n // 3) if max_size is None else max_size
    perm = rng.permutation(n)
    ka = int(rng.integers(1, max_size + 1))
    kb = int(rng.integers(1, max_size + 1))
    return sorted(perm[:ka].tolist()), sorted(perm[ka:ka + kb].tolist())


def admissible(n, A, B, rng, k=None):
    """Random test function(s) equal to 1 on A and 0 on B."""
    shape = (n,) if k is None else (k, n)
    F = rng.uniform(-1.0, 2.0, size=shape)
    F[..., A] = 1.0
    F[..., B] = 0.0
    return F


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain2():
    return two_state()


@pytest.fixture
def cycle3():
    return one_way_cycle()


@pytest.fixture
def rand10():
    return random_chain(10, 1)


@pytest.fixture
def rand30():
    return random_chain(30, 2, density=0.3)


@pytest.fixture
def rev12():
    return random_reversible_chain(12, 3, density=0.5)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
