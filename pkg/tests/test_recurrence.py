import numpy as np
import pytest

from capax.chain import conductances, stationarity_residual
from capax.errors import BadLambda, BoxTooLarge, UnboundedBelowY
from capax.families import MetropolisWalk, NearestNeighborWalk, truncate
from capax.potentials import capacity_prob
from capax.recurrence import (
    EXPERIMENT_COLUMNS,
    LatticeEnvironment,
    YSpec,
    boundary_bound,
    capacity_decay,
    gen_cycle_env,
    inner_boundary,
    lattice_truncation,
    lemma48_bound,
    log_profile,
    moment_diagnostic,
    origin_capacity,
    run_experiment,
    summability_check,
)
from capax.variational import dirichlet_form


def single_plaquette(n=4, corner=(0, 0), w=1.0, Y=1.0):
    W = np.zeros((2 * n + 2, 2 * n + 2))
    W[corner[0] + n + 1, corner[1] + n + 1] = w
    return LatticeEnvironment.from_plaquettes(n, W, Y)


def bound_by_loops(env, m):
    """Independent evaluation of the log-profile bound, one ordered arc at a time."""

    def f(x):
        r = max(abs(x[0]), abs(x[1]))
        return 1.0 - np.log1p(r) / np.log(m + 2.0) if r <= m else 0.0

    def plaquette_arcs(c):
        i, j = c
        pts = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1), (i, j)]
        return list(zip(pts[:-1], pts[1:]))

    def pmax(c):
        return max((f(a) - f(b)) ** 2 for a, b in plaquette_arcs(c))

    n = env.n
    total = 0.0
    for x in env.box(n):
        for y in env.neighbors(x):
            cs, _ = env.arc(x, y)
            i, j = min(x[0], y[0]), min(x[1], y[1])
            if x[1] == y[1]:
                plaqs = [(i, j), (i, j - 1)]
            else:
                plaqs = [(i, j), (i - 1, j)]
            w2 = sum(env.plaquette(p) ** 2 for p in plaqs)
            total += (cs + w2 / cs) * max(pmax(p) for p in plaqs)
    return 4.0 * total


class TestEnvironment:
    def test_zero_weights_reversible(self):
        env = LatticeEnvironment.from_plaquettes(5)
        assert np.all(env.cah == 0) and np.all(env.cav == 0)
        ch = lattice_truncation(env, 3)
        g = conductances(ch)
        assert np.abs(g.ca).max() <= 1e-15

    def test_single_plaquette(self):
        env = single_plaquette()
        loop = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]
        for x, y in zip(loop[:-1], loop[1:]):
            cs, ca = env.arc(x, y)
            assert ca == 1.0 and cs == 2.0
            assert env.arc(y, x)[1] == -1.0
        assert np.count_nonzero(env.cah) + np.count_nonzero(env.cav) == 4

    def test_divergence_free(self):
        env = gen_cycle_env(32, 0.3, seed=7)
        assert np.abs(env.vertex_divergence()).max() <= 1e-12
        ch = lattice_truncation(env, 31)
        assert stationarity_residual(ch.rates, ch.mu) <= 1e-12

    def test_invariants(self):
        env = gen_cycle_env(10, 0.25, YSpec(delta=0.5), seed=1)
        assert np.all(env.csh >= 0.5) and np.all(env.csv >= 0.5)
        assert np.all(env.csh - np.abs(env.cah) > 0)

    def test_poisson_mean(self):
        lam = 0.3
        env = gen_cycle_env(31, lam, seed=11)
        w = env.W.ravel()
        assert w.size == 64 * 64
        assert abs(w.mean() - lam**4) <= 3 * np.sqrt(lam**4 / w.size)

    def test_reproducible(self):
        a, b = gen_cycle_env(6, 0.2, seed=4), gen_cycle_env(6, 0.2, seed=4)
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.Yh, b.Yh)

    def test_errors(self):
        with pytest.raises(BadLambda):
            gen_cycle_env(4, 0.4)
        with pytest.raises(BadLambda):
            gen_cycle_env(4, 0.0)
        with pytest.raises(UnboundedBelowY):
            YSpec(delta=0.0)
        with pytest.raises(BoxTooLarge):
            lattice_truncation(gen_cycle_env(4, 0.2), 4)

    def test_yspec_roundtrip(self):
        y = YSpec(kind="constant", delta=2.0)
        assert YSpec.from_dict(y.to_dict()) == y
        assert y.mean == 2.0


class TestTruncation:
    def test_simple_walk_m1(self):
        ch = lattice_truncation(LatticeEnvironment.from_plaquettes(2), 1)
        assert ch.n == 10
        d = ch.index_of("@d")
        assert ch.rates[d, ch.index_of((1, 1))] == 2.0
        assert ch.rates[d, ch.index_of((1, 0))] == 1.0
        assert ch.rates[d, ch.index_of((0, 0))] == 0.0
        assert ch.mu[d] == 1.0
        assert np.all(ch.mu[:-1] == 1.0)

    def test_simple_walk_m2(self):
        ch = lattice_truncation(LatticeEnvironment.from_plaquettes(3), 2)
        assert ch.n == 26
        assert ch.holding[ch.index_of("@d")] == 20.0

    def test_matches_family_truncation(self):
        a = lattice_truncation(LatticeEnvironment.from_plaquettes(5), 4)
        b = truncate(NearestNeighborWalk(2), 4)
        assert origin_capacity(a) == pytest.approx(origin_capacity(b), rel=1e-12)


class TestCapacityDecay:
    def test_two_dimensional(self):
        caps = capacity_decay(NearestNeighborWalk(2), [8, 16, 32, 64])
        assert np.all(np.diff(caps) < 0)
        scaled = caps * np.log([8, 16, 32, 64])
        assert np.all((scaled >= 1) & (scaled <= 10))

    @pytest.mark.parametrize("m", [1, 5, 20])
    def test_one_dimensional(self, m):
        cap = capacity_decay(NearestNeighborWalk(1), [m])[0]
        assert cap == pytest.approx(2.0 / (m + 1), rel=1e-12)

    def test_biased_transient(self):
        p, q = 0.7, 0.3
        walk = NearestNeighborWalk(1, up=p, down=q)
        ms = [5, 10, 20, 40]
        caps = capacity_decay(walk, ms)
        for m, cap in zip(ms, caps):
            c = lambda k: p * (p / q) ** k
            right = 1.0 / sum(1.0 / c(k) for k in range(0, m + 1))
            left = 1.0 / sum(1.0 / c(k) for k in range(-m - 1, 0))
            assert cap == pytest.approx(right + left, rel=1e-10)
        assert caps.min() >= p - q
        assert np.all(np.diff(caps) <= 0)

    def test_random_env_decreasing(self):
        env = gen_cycle_env(17, 0.2, seed=3)
        caps = capacity_decay(env, [2, 4, 8, 16])
        assert np.all(np.diff(caps) < 1e-12 * caps[0])

    def test_three_dimensional_bounded_below(self):
        caps = capacity_decay(NearestNeighborWalk(3), [2, 4, 8])
        assert np.all(np.diff(caps) < 0)
        assert caps.min() > 3.5

    def test_m_list_increasing(self):
        with pytest.raises(Exception):
            capacity_decay(NearestNeighborWalk(1), [4, 2])


class TestLogProfileBound:
    def test_log_profile(self):
        f = log_profile(4, 3)
        assert f[4, 4] == 1.0
        assert f[0, 0] == 0.0
        assert f[7, 4] == pytest.approx(1 - np.log(4) / np.log(5))

    def test_reversible_env(self):
        env = LatticeEnvironment.from_plaquettes(7, Y=1.5)
        m = 6
        val = lemma48_bound(env, m, check=True)
        ch = lattice_truncation(env, m)
        f = log_profile(m, m).ravel()
        F = np.append(f, 0.0)
        assert val >= dirichlet_form(ch, F) >= origin_capacity(ch)

    def test_single_plaquette_direct_sum(self):
        env = single_plaquette(n=5, corner=(1, -2), w=2.0)
        assert lemma48_bound(env, 4) == pytest.approx(bound_by_loops(env, 4), rel=1e-12)

    def test_random_env_direct_sum(self):
        env = gen_cycle_env(6, 0.3, seed=9)
        assert lemma48_bound(env, 5) == pytest.approx(bound_by_loops(env, 5), rel=1e-12)

    def test_decreasing_and_dominating(self):
        env = gen_cycle_env(33, 0.2, seed=1)
        bounds = [lemma48_bound(env, m, check=True) for m in (8, 16, 32)]
        assert np.all(np.diff(bounds) < 0)


class TestBoundaryBound:
    def test_single_point(self):
        walk = NearestNeighborWalk(2, up=0.25)
        ch = truncate(walk, 0)
        x = ch.index_of((0, 0))
        assert boundary_bound(ch, x, [ch.n - 1]) == 1.0

    def test_box_counting(self):
        walk = NearestNeighborWalk(2, up=0.25)
        ch = truncate(walk, 3)
        x, B = ch.index_of((0, 0)), [ch.n - 1]
        assert inner_boundary(ch, B).size == 24
        assert boundary_bound(ch, x, B) == min(5 * 24, 1.0)

    def test_deep_well(self):
        m = 4

        def V(x):
            return 25.0 if max(abs(x[0]), abs(x[1])) == m else 0.0

        ch = truncate(MetropolisWalk(V), m)
        x, B = ch.index_of((0, 0)), [ch.n - 1]
        val = boundary_bound(ch, x, B)
        assert val < 1e-8
        assert val >= capacity_prob(ch, [x], B)

    def test_random_env(self):
        env = gen_cycle_env(9, 0.25, seed=2)
        ch = lattice_truncation(env, 8)
        x = ch.index_of((0, 0))
        assert boundary_bound(ch, x, [ch.n - 1]) >= origin_capacity(ch)


class TestSummability:
    def test_reversible(self):
        out = summability_check(LatticeEnvironment.from_plaquettes(16), [4, 8, 16])
        assert out["partial_sums"] == [0.0, 0.0, 0.0]

    def test_single_plaquette(self):
        out = summability_check(single_plaquette(n=16), [4, 8, 16])
        # four arcs with c_a = 1, c_s = 2, counted in both orientations
        assert out["partial_sums"] == pytest.approx([4.0, 4.0, 4.0])
        assert abs(out["growth_exponent"]) < 1e-12

    def test_area_growth(self):
        env = gen_cycle_env(128, 0.3, seed=5)
        assert summability_check(env)["m"] == [8, 16, 32, 64, 128]
        # fit where each box holds dozens of nonzero plaquettes
        out = summability_check(env, [32, 64, 128])
        assert 1.6 < out["growth_exponent"] < 2.4


def test_moment_diagnostic():
    envs = [gen_cycle_env(8, 0.2, seed=s) for s in range(5)]
    out = moment_diagnostic(envs)
    assert out["environments"] == 5
    assert out["sup_arc_mean"] >= out["overall_mean"] > 0.1


class TestExperiment:
    def test_rows(self):
        rows = run_experiment(0.2, YSpec(), [1, 2], [4, 8])
        assert [(r[0], r[1]) for r in rows] == [(1, 4), (1, 8), (2, 4), (2, 8)]
        assert len(EXPERIMENT_COLUMNS) == len(rows[0])
        for seed in (1, 2):
            caps = [r[2] for r in rows if r[0] == seed]
            assert caps[1] < caps[0]
        for r in rows:
            assert r[3] >= r[2] and r[4] >= r[2]

    def test_workers_deterministic(self):
        a = run_experiment(0.2, None, [3, 1, 2], [2, 4], workers=3)
        b = run_experiment(0.2, None, [1, 2, 3], [4, 2], workers=1)
        assert [r[:5] for r in a] == [r[:5] for r in b]
