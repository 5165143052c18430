import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capax.chain import adjoint, build_chain, conductances
from capax.collapse import collapse_exterior
from capax.errors import EmptySet, SetsIntersect
from capax.families import NearestNeighborWalk
from capax.flows import divergence, gradient_flow, phi_flow
from capax.generators import one_way_cycle, random_chain, random_reversible_chain
from capax.montecarlo import (
    SimConfig,
    estimate_absorption_steps,
    estimate_escape,
    estimate_harmonic_measure,
    estimate_hitting,
    estimate_return,
)
from capax.potentials import (
    CapacityReport,
    capacity_prob,
    capacity_prob_reversed,
    current,
    equilibrium_potential,
    escape_probabilities,
    green_killed,
    harmonic_measure,
    point_capacity,
    return_escape_probability,
)

from conftest import random_pair


class TestEquilibriumPotential:
    def test_two_state(self, chain2):
        sol = equilibrium_potential(chain2, [0], [1])
        np.testing.assert_array_equal(sol.V, [1.0, 0.0])
        np.testing.assert_array_equal(sol.F, [1.0, 0.0])

    def test_one_way_cycle(self, cycle3):
        sol = equilibrium_potential(cycle3, [0], [2])
        assert sol.V[1] == 0.0
        # the adjoint walks 1 -> 0 directly
        assert sol.V_star[1] == 1.0

    def test_harmonic(self, rand30):
        A, B = [0, 3], [7, 11, 20]
        sol = equilibrium_potential(rand30, A, B)
        for chain, V in ((rand30, sol.V), (adjoint(rand30), sol.V_star)):
            LV = chain.apply(V)
            inner = np.setdiff1d(np.arange(chain.n), A + B)
            assert np.all(np.abs(LV[inner]) <= 1e-10 * chain.holding[inner])
            assert V.min() >= 0 and V.max() <= 1

    def test_matches_simulation(self, rand10):
        A, B = [0], [9]
        sol = equilibrium_potential(rand10, A, B)
        cfg = SimConfig(seed=11, samples=100_000)
        for x in range(1, 9):
            est = estimate_hitting(rand10, A, B, x, cfg)
            assert est.covers(sol.V[x], sigmas=3), (x, est.mean, sol.V[x])

    def test_errors(self, rand10):
        with pytest.raises(EmptySet):
            equilibrium_potential(rand10, [], [1])
        with pytest.raises(SetsIntersect):
            equilibrium_potential(rand10, [0, 1], [1])


class TestCapacityProb:
    def test_two_state(self, chain2):
        assert capacity_prob(chain2, [0], [1]) == pytest.approx(2 / 3, rel=1e-14)
        assert capacity_prob_reversed(chain2, [0], [1]) == pytest.approx(2 / 3, rel=1e-14)

    def test_cycle(self, cycle3):
        assert capacity_prob(cycle3, [0], [1]) == pytest.approx(1 / 3, rel=1e-14)
        assert capacity_prob_reversed(cycle3, [0], [1]) == pytest.approx(1 / 3, rel=1e-14)

    def test_equals_escape_definition(self, rand30):
        A, B = [1, 2, 5], [9, 10]
        e = escape_probabilities(rand30, A, B)
        assert capacity_prob(rand30, A, B) == pytest.approx(float(np.dot(rand30.M[A], e)), rel=1e-12)

    def test_matches_simulation(self, rand10):
        cap = capacity_prob(rand10, [0], [9])
        est = estimate_escape(rand10, [0], [9], SimConfig(seed=5, samples=1_000_000))
        assert est.capacity.covers(cap, sigmas=3)
        assert capacity_prob_reversed(rand10, [0], [9]) == pytest.approx(cap, rel=1e-10)

    def test_symmetry_many_pairs(self):
        ch = random_chain(40, 17, density=0.3)
        rng = np.random.default_rng(0)
        for _ in range(100):
            A, B = random_pair(ch.n, rng, max_size=6)
            a = capacity_prob(ch, A, B)
            assert abs(a - capacity_prob(ch, B, A)) <= 1e-10 * a
            assert abs(a - capacity_prob_reversed(ch, A, B)) <= 1e-10 * a

    def test_exhaustion(self):
        ch = random_chain(200, 23, density=0.02)
        rng = np.random.default_rng(4)
        order = rng.permutation(200)
        A, B = [int(order[0])], [int(order[1])]
        target = capacity_prob(ch, A, B)
        caps = []
        for k in range(20, 201, 20):
            K = set(order[:k].tolist())
            Bn = sorted(set(B) | (set(range(200)) - K))
            caps.append(capacity_prob(ch, A, Bn))
        assert np.all(np.diff(caps) <= 1e-12 * caps[0])
        assert caps[-1] == pytest.approx(target, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_monotone_in_sets(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 30))
    ch = random_chain(n, seed, density=float(rng.uniform(0.1, 1.0)))
    A, B = random_pair(n, rng)
    rest = np.setdiff1d(np.arange(n), np.concatenate([A, B]))
    cap = capacity_prob(ch, A, B)
    if rest.size:
        extra = rng.choice(rest, size=int(rng.integers(1, rest.size + 1)), replace=False)
        A2 = np.concatenate([A, extra])
        B2 = np.concatenate([B, extra])
        assert cap <= capacity_prob(ch, A2, B) * (1 + 1e-10)
        assert cap <= capacity_prob(ch, A, B2) * (1 + 1e-10)
    assert abs(cap - capacity_prob(ch, B, A)) <= 1e-10 * cap


class TestGreen:
    def test_single_interior(self):
        ch = build_chain([(0, 1, 1.0), (0, 2, 2.0), (1, 0, 1.0), (2, 0, 1.0)])
        G = green_killed(ch, [1, 2])
        assert G(0, 0) == 1.0

    def test_cycle(self, cycle3):
        G = green_killed(cycle3, [2])
        assert G(0, 1) == pytest.approx(1.0, rel=1e-15)
        assert G(1, 0) == 0.0

    def test_duality(self, rand30):
        B = [4, 8, 15]
        G = green_killed(rand30, B).dense()
        Gs = green_killed(adjoint(rand30), B).dense()
        M = rand30.M
        np.testing.assert_allclose(M[:, None] * G, (M[:, None] * Gs).T, rtol=1e-10, atol=1e-14)
        assert G.min() >= 0

    def test_expected_steps_simulation(self, rand10):
        G = green_killed(rand10, [9])
        steps = G.expected_steps()
        cfg = SimConfig(seed=2, samples=50_000)
        for x in (0, 4, 8):
            est = estimate_absorption_steps(rand10, [9], x, cfg)
            assert est.covers(steps[x], sigmas=3), (x, est.mean, steps[x])

    def test_last_exit_identity(self, rand30):
        A, B = [0, 5, 6], [12, 19]
        V = equilibrium_potential(rand30, A, B).V
        e = escape_probabilities(rand30, A, B)
        Gs = green_killed(adjoint(rand30), B).dense()
        M = rand30.M
        rhs = (Gs[A, :] * (M[A] * e)[:, None]).sum(axis=0) / M
        inner = np.setdiff1d(np.arange(rand30.n), B)
        np.testing.assert_allclose(rhs[inner], V[inner], rtol=0, atol=1e-10)

    def test_empty_complement(self, chain2):
        with pytest.raises(EmptySet):
            green_killed(chain2, [0, 1])


class TestHarmonicMeasure:
    def test_singleton(self, rand10):
        nu = harmonic_measure(rand10, [3], [0])
        expected = np.zeros(10)
        expected[3] = 1.0
        np.testing.assert_array_equal(nu, expected)

    def test_symmetric_pair(self):
        ring = [(i, (i + 1) % 4, 1.0) for i in range(4)] + [((i + 1) % 4, i, 1.0) for i in range(4)]
        nu = harmonic_measure(build_chain(ring), [0, 2], [1])
        np.testing.assert_allclose(nu[[0, 2]], [0.5, 0.5], rtol=1e-14)

    def test_sums_to_one(self, rand30):
        nu = harmonic_measure(rand30, [0, 1, 2, 3], [20])
        assert nu.sum() == pytest.approx(1.0, rel=1e-14)
        assert np.all(nu[[0, 1, 2, 3]] > 0)

    def test_trapped_state_gets_zero(self):
        # state 1 only jumps back to 0, so it never escapes before returning to A
        ch = build_chain([(0, 1, 1.0), (1, 0, 1.0), (0, 2, 1.0), (2, 0, 1.0)])
        nu = harmonic_measure(ch, [0, 1], [2])
        assert nu[1] == 0.0 and nu[0] == 1.0

    def test_simulation(self, rand10):
        A, B = [0, 1, 2], [9]
        cfg = SimConfig(seed=8, samples=200_000)
        est = estimate_escape(rand10, A, B, cfg)
        e = escape_probabilities(rand10, A, B)
        for k, pe in enumerate(est.per_state):
            assert pe.covers(e[k], sigmas=3)
        nu_hat = estimate_harmonic_measure(rand10, A, B, cfg)
        np.testing.assert_allclose(nu_hat, harmonic_measure(rand10, A, B), atol=0.01)


class TestCurrent:
    def test_series(self):
        ch = build_chain([(0, 1, 1.0), (1, 0, 1.0), (1, 2, 3.0), (2, 1, 3.0)])
        i = current(ch, [0], [2])
        assert i(0, 1) == pytest.approx(1.0, rel=1e-14)
        assert i(1, 2) == pytest.approx(1.0, rel=1e-14)
        assert i(2, 1) == pytest.approx(-1.0, rel=1e-14)

    def test_reversible_gradient(self, rev12):
        A, B = [0], [5, 6]
        i = current(rev12, A, B)
        V = equilibrium_potential(rev12, A, B).V
        g = gradient_flow(V, conductances(rev12)) * (1.0 / capacity_prob(rev12, A, B))
        np.testing.assert_allclose(i.values, g.values, rtol=1e-9, atol=1e-12)

    def test_conservation(self, rand30):
        A, B = [0, 7], [3, 4, 22]
        div = divergence(current(rand30, A, B))
        inner = np.setdiff1d(np.arange(rand30.n), A + B)
        assert np.abs(div[inner]).max() <= 1e-10
        assert div[A].sum() == pytest.approx(1.0, rel=1e-10)
        assert div[B].sum() == pytest.approx(-1.0, rel=1e-10)

    def test_is_scaled_phi(self, rand10):
        A, B = [2], [7]
        Vs = equilibrium_potential(rand10, A, B).V_star
        phi = phi_flow(Vs, conductances(rand10))
        i = current(rand10, A, B)
        np.testing.assert_allclose(i.values * capacity_prob(rand10, A, B), phi.values, rtol=1e-12)


class TestPointCapacity:
    def test_no_return(self):
        ch = build_chain([(0, 1, 1.0), (0, 2, 1.0), (1, 0, 0.5), (2, 0, 0.5)],
                         labels=["x", "b1", "b2"])
        assert point_capacity(ch, [1, 2], 0) == pytest.approx(ch.M[0], rel=1e-15)
        assert green_killed(ch, [1, 2])(0, 0) == 1.0

    @pytest.mark.parametrize("n", [1, 3, 10, 25])
    def test_one_dimensional_resistor(self, n):
        walk = NearestNeighborWalk(1)
        ch = collapse_exterior(walk, walk.box(n))
        x = ch.index_of((0,))
        # two series chains of n+1 unit resistors in parallel
        assert point_capacity(ch, [ch.n - 1], x) == pytest.approx(2.0 / (n + 1), rel=1e-12)

    def test_equals_escape(self, rand30):
        B = [10, 11]
        caps = point_capacity(rand30, B)
        for x in (0, 5, 29):
            esc = return_escape_probability(rand30, B, x)
            assert caps[x] == pytest.approx(rand30.M[x] * esc, rel=1e-10)
        assert caps[5] == pytest.approx(capacity_prob(rand30, [5], B), rel=1e-10)

    def test_three_dimensional_simulation(self):
        walk = NearestNeighborWalk(3)
        ch = collapse_exterior(walk, walk.box(10))
        x = ch.index_of((0, 0, 0))
        B = [ch.n - 1]
        cap = point_capacity(ch, B, x)
        est = estimate_return(ch, x, B, SimConfig(seed=3, samples=100_000))
        assert est.covers(cap / ch.M[x], sigmas=3)
        assert 0.6 < cap / ch.M[x] < 0.7


def test_report_serializes(rand10):
    rep = CapacityReport(A=[0], B=[9], value_prob=1.0, value_minmax=1.0 + 1e-12, value_flow=1.0)
    doc = json.loads(json.dumps(rep.to_dict()))
    assert doc["max_rel_dev"] == pytest.approx(1e-12, rel=1e-3)
