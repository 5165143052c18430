"""Capacity decay on growing boxes and the plaquette-cycle random environment.

The environment lives on ``[-n, n]^2``. Plaquette ``p`` with lower-left corner
``(i, j)`` carries an integer weight ``W[p]`` and contributes ``+W[p]`` to the
antisymmetric conductance of each of its four arcs traversed
counter-clockwise. Plaquette corners range over ``[-n-1, n]^2`` so that every
arc of the box sees both of its plaquettes.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chain import ChainModel
from .collapse import collapse_exterior
from .config import TOL
from .errors import BadLambda, BoundViolated, BoxTooLarge, UnboundedBelowY, ValidationError
from .families import lattice_box, truncate
from .potentials import as_index_array, capacity_prob


@dataclass(frozen=True)
class YSpec:
    """Law of the symmetric base conductance ``Y``.

    ``kind="shifted_exp"``: ``Y = delta + scale * Exp(1)``.
    ``kind="constant"``: ``Y = delta``.
    """

    kind: str = "shifted_exp"
    delta: float = 0.1
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("shifted_exp", "constant"):
            raise ValidationError(f"unknown Y law {self.kind!r}")
        if not self.delta > 0:
            raise UnboundedBelowY("Y must be bounded below by a positive constant")
        if self.kind == "shifted_exp" and not self.scale >= 0:
            raise ValidationError("scale must be non-negative")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "constant":
            return np.full(shape, float(self.delta))
        return self.delta + self.scale * rng.exponential(1.0, size=shape)

    @property
    def mean(self) -> float:
        return self.delta + (self.scale if self.kind == "shifted_exp" else 0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "delta": self.delta, "scale": self.scale}

    @classmethod
    def from_dict(cls, doc: dict) -> "YSpec":
        return cls(**doc)


@dataclass(frozen=True, eq=False)
class LatticeEnvironment:
    """Nearest-neighbour conductances on ``[-n, n]^2`` with ``mu = 1``.

    Arrays are indexed by coordinate plus offset: ``W[i+n+1, j+n+1]`` for
    plaquettes, ``Yh/cah[i+n, j+n]`` for the arc ``(i,j) -> (i+1,j)`` and
    ``Yv/cav[i+n, j+n]`` for ``(i,j) -> (i,j+1)``.
    """

    n: int
    W: np.ndarray
    Yh: np.ndarray
    Yv: np.ndarray
    lam: float | None = None
    y_spec: YSpec | None = None
    seed: int | None = None
    cah: np.ndarray = field(init=False, repr=False)
    cav: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n
        W = np.asarray(self.W, dtype=float)
        if W.shape != (2 * n + 2, 2 * n + 2):
            raise ValidationError("plaquette array must have shape (2n+2, 2n+2)")
        if self.Yh.shape != (2 * n, 2 * n + 1) or self.Yv.shape != (2 * n + 1, 2 * n):
            raise ValidationError("edge arrays have the wrong shape")
        if np.any(self.Yh <= 0) or np.any(self.Yv <= 0):
            raise UnboundedBelowY("Y must be positive on every edge")
        # horizontal arc at x: plaquette above (corner x) minus plaquette below (corner x - e2)
        cah = W[1:2 * n + 1, 1:2 * n + 2] - W[1:2 * n + 1, 0:2 * n + 1]
        # vertical arc at x: plaquette to the left (corner x - e1) minus plaquette to the right (corner x)
        cav = W[0:2 * n + 1, 1:2 * n + 1] - W[1:2 * n + 2, 1:2 * n + 1]
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "cah", cah)
        object.__setattr__(self, "cav", cav)

    @classmethod
    def from_plaquettes(cls, n: int, W=None, Y: float = 1.0) -> "LatticeEnvironment":
        """Deterministic environment with constant ``Y`` and given plaquette weights."""
        W = np.zeros((2 * n + 2, 2 * n + 2)) if W is None else np.asarray(W, dtype=float)
        return cls(n=n, W=W, Yh=np.full((2 * n, 2 * n + 1), float(Y)), Yv=np.full((2 * n + 1, 2 * n), float(Y)))

    def plaquette(self, corner) -> float:
        i, j = corner
        return float(self.W[i + self.n + 1, j + self.n + 1])

    @property
    def csh(self) -> np.ndarray:
        return self.Yh + np.abs(self.cah)

    @property
    def csv(self) -> np.ndarray:
        return self.Yv + np.abs(self.cav)

    # chain family protocol (mu = 1)

    def mu(self, x) -> float:
        return 1.0

    def _inside(self, x) -> bool:
        return abs(x[0]) <= self.n and abs(x[1]) <= self.n

    def neighbors(self, x):
        i, j = x
        cand = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)]
        return [y for y in cand if self._inside(y)]

    def arc(self, x, y) -> tuple[float, float]:
        """``(c_s, c_a)`` of the arc ``(x, y)``."""
        n = self.n
        (i, j), (k, l) = x, y
        if l == j and abs(k - i) == 1:
            a = min(i, k)
            s, c = self.Yh[a + n, j + n] + abs(self.cah[a + n, j + n]), self.cah[a + n, j + n]
            return float(s), float(c if k > i else -c)
        if k == i and abs(l - j) == 1:
            b = min(j, l)
            s, c = self.Yv[i + n, b + n] + abs(self.cav[i + n, b + n]), self.cav[i + n, b + n]
            return float(s), float(c if l > j else -c)
        return 0.0, 0.0

    def rate(self, x, y) -> float:
        s, a = self.arc(x, y)
        return s + a

    def box(self, m: int) -> list[tuple]:
        return lattice_box(m, 2)

    def origin(self) -> tuple:
        return (0, 0)

    def vertex_divergence(self) -> np.ndarray:
        """``sum_y c_a(x, y)`` at every vertex of ``[-n+1, n-1]^2``."""
        h, v = self.cah, self.cav
        # out along +e1 minus in from -e1, same for e2
        div = h[1:, 1:-1] - h[:-1, 1:-1] + v[1:-1, 1:] - v[1:-1, :-1]
        return div


def gen_cycle_env(n: int, lam: float, y_spec: YSpec | None = None, seed: int = 0) -> LatticeEnvironment:
    """Random plaquette-cycle environment.

    Plaquette weights are i.i.d. Poisson with mean ``lam**4``; base
    conductances are i.i.d. from ``y_spec``.
    """
    if not 0 < lam < 1.0 / 3.0:
        raise BadLambda("lambda must lie in (0, 1/3)")
    y_spec = YSpec() if y_spec is None else y_spec
    rng = np.random.default_rng(seed)
    W = rng.poisson(lam**4, size=(2 * n + 2, 2 * n + 2)).astype(float)
    Yh = y_spec.sample(rng, (2 * n, 2 * n + 1))
    Yv = y_spec.sample(rng, (2 * n + 1, 2 * n))
    return LatticeEnvironment(n=n, W=W, Yh=Yh, Yv=Yv, lam=lam, y_spec=y_spec, seed=seed)


def lattice_truncation(env: LatticeEnvironment, m: int) -> ChainModel:
    """Box ``[-m, m]^2`` of the environment with its exterior collapsed (last state)."""
    if m > env.n - 1:
        raise BoxTooLarge(f"box half-width {m} needs an environment of half-width at least {m + 1}")
    if m < 0:
        raise ValidationError("box half-width must be non-negative")
    return collapse_exterior(env, lattice_box(m, 2))


def origin_capacity(chain: ChainModel, origin=(0, 0)) -> float:
    """``Cap(origin, exterior)`` on a truncation whose last state is the exterior."""
    return capacity_prob(chain, [chain.index_of(origin)], [chain.n - 1])


def capacity_decay(source, m_list: Sequence[int]) -> np.ndarray:
    """Exact ``Cap(0, B_m^c)`` for each box half-width in ``m_list``."""
    m_list = [int(m) for m in m_list]
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ValidationError("m_list must be strictly increasing")
    out = []
    for m in m_list:
        if isinstance(source, LatticeEnvironment):
            chain = lattice_truncation(source, m)
        else:
            chain = truncate(source, m)
        out.append(origin_capacity(chain, source.origin()))
    return np.array(out)


# ----------------------------------------------------------------------------
# bounds


def log_profile(n_grid: int, m: int) -> np.ndarray:
    """``(1 - log(1 + |x|_inf) / log(m + 2))`` on ``[-m, m]^2``, zero elsewhere.

    Returned on the grid ``[-n_grid, n_grid]^2``.
    """
    c = np.arange(-n_grid, n_grid + 1)
    norm = np.maximum(np.abs(c)[:, None], np.abs(c)[None, :])
    f = 1.0 - np.log1p(norm) / np.log(m + 2.0)
    return np.where(norm <= m, f, 0.0)


def lemma48_bound(env: LatticeEnvironment, m: int, check: bool = False) -> float:
    """Log-profile upper bound on ``Cap(0, B_m^c)``.

    ``4 sum over ordered arcs {c_s + (W_+^2 + W_-^2)/c_s} max_e [grad f]^2``
    where ``W_+``, ``W_-`` are the weights of the two plaquettes containing
    the arc and the maximum runs over the eight arcs of those plaquettes.
    """
    n = env.n
    if m > n - 1:
        raise BoxTooLarge(f"box half-width {m} needs an environment of half-width at least {m + 1}")
    # f on [-n-1, n+1]^2 so every plaquette edge is available
    f = log_profile(n + 1, m)
    gh = (f[1:, :] - f[:-1, :]) ** 2  # (2n+2, 2n+3): arc (i,j)->(i+1,j), i in [-n-1, n]
    gv = (f[:, 1:] - f[:, :-1]) ** 2  # (2n+3, 2n+2)
    # plaquette corner (i,j) in [-n-1, n]^2 -> grid index i+n+1
    pmax = np.maximum.reduce([gh[:, :-1], gh[:, 1:], gv[:-1, :], gv[1:, :]])
    W = env.W
    # horizontal arcs (i,j)->(i+1,j), i in [-n, n-1], j in [-n, n]: plaquettes (i,j) and (i,j-1)
    Wa, Wb = W[1:2 * n + 1, 1:2 * n + 2], W[1:2 * n + 1, 0:2 * n + 1]
    Pa, Pb = pmax[1:2 * n + 1, 1:2 * n + 2], pmax[1:2 * n + 1, 0:2 * n + 1]
    cs = env.csh
    th = (cs + (Wa**2 + Wb**2) / cs) * np.maximum(Pa, Pb)
    # vertical arcs (i,j)->(i,j+1): plaquettes (i-1,j) and (i,j)
    Wa, Wb = W[0:2 * n + 1, 1:2 * n + 1], W[1:2 * n + 2, 1:2 * n + 1]
    Pa, Pb = pmax[0:2 * n + 1, 1:2 * n + 1], pmax[1:2 * n + 2, 1:2 * n + 1]
    cs = env.csv
    tv = (cs + (Wa**2 + Wb**2) / cs) * np.maximum(Pa, Pb)
    value = 4.0 * 2.0 * float(th.sum() + tv.sum())
    if check:
        cap = origin_capacity(lattice_truncation(env, m))
        if value < cap * (1 - TOL.bound_slack):
            raise BoundViolated(f"log-profile bound {value!r} below the exact capacity {cap!r}")
    return value


def inner_boundary(chain: ChainModel, B_ext) -> np.ndarray:
    """States off ``B_ext`` with a positive rate into ``B_ext``."""
    B_ext = as_index_array(chain, B_ext, "exterior")
    R = chain.rates.tocsc()[:, B_ext]
    hits = np.asarray(R.sum(axis=1)).ravel() > 0
    hits[B_ext] = False
    return np.flatnonzero(hits)


def boundary_bound(chain: ChainModel, x: int, B_ext, check: bool = True) -> float:
    """``min(5 M(inner boundary), M(x))`` as an upper bound on ``Cap(x, B_ext)``.

    With unit holding rates and ``mu(x) = 1`` this is ``min(5 mu(inner boundary), 1)``.
    """
    B_ext = as_index_array(chain, B_ext, "exterior")
    x = int(x)
    bd = inner_boundary(chain, B_ext)
    value = float(min(5.0 * chain.M[bd].sum(), chain.M[x]))
    if check:
        cap = capacity_prob(chain, [x], B_ext)
        if value < cap * (1 - TOL.bound_slack):
            raise BoundViolated(f"boundary bound {value!r} below the exact capacity {cap!r}")
    return value


def summability_check(env: LatticeEnvironment, m_list: Sequence[int] | None = None) -> dict:
    """Partial sums of ``c_a^2 / c_s`` over ordered arcs of growing boxes.

    The growth rate is the least-squares slope of ``log(sum)`` against
    ``log(m)``; a slope near 2 means the sum grows like the box area.
    """
    n = env.n
    if m_list is None:
        m_list = []
        m = 8
        while m <= n:
            m_list.append(m)
            m *= 2
    sums = []
    for m in m_list:
        if m > n:
            raise BoxTooLarge(f"box half-width {m} exceeds the environment")
        lo, hi = n - m, n + m
        rh = (env.cah**2 / env.csh)[lo:hi, lo:hi + 1]
        rv = (env.cav**2 / env.csv)[lo:hi + 1, lo:hi]
        sums.append(2.0 * float(rh.sum() + rv.sum()))
    sums = np.array(sums)
    slope = None
    if len(m_list) >= 2 and np.all(sums > 0):
        slope = float(np.polyfit(np.log(m_list), np.log(sums), 1)[0])
    return {"m": list(m_list), "partial_sums": sums.tolist(), "growth_exponent": slope}


def arc_moments(env: LatticeEnvironment) -> tuple[np.ndarray, np.ndarray]:
    """``c_s + (W_+^2 + W_-^2)/c_s`` on horizontal and vertical arcs."""
    n = env.n
    W = env.W
    Wa, Wb = W[1:2 * n + 1, 1:2 * n + 2], W[1:2 * n + 1, 0:2 * n + 1]
    h = env.csh + (Wa**2 + Wb**2) / env.csh
    Wa, Wb = W[0:2 * n + 1, 1:2 * n + 1], W[1:2 * n + 2, 1:2 * n + 1]
    v = env.csv + (Wa**2 + Wb**2) / env.csv
    return h, v


def moment_diagnostic(envs: Sequence[LatticeEnvironment]) -> dict:
    """Per-arc average of the moment quantity over environments, and its supremum.

    Reported as a diagnostic only; the supremum over arcs of an expectation
    cannot be verified from finitely many samples.
    """
    hs, vs = zip(*(arc_moments(e) for e in envs))
    h = np.mean(hs, axis=0)
    v = np.mean(vs, axis=0)
    return {
        "environments": len(envs),
        "sup_arc_mean": float(max(h.max(), v.max())),
        "overall_mean": float(np.concatenate([h.ravel(), v.ravel()]).mean()),
    }


# ----------------------------------------------------------------------------
# experiment grid


EXPERIMENT_COLUMNS = ("seed", "m", "cap_exact", "lemma48_bound", "boundary_bound", "runtime_ms")


def _cell(lam, y_spec, seed, m_list, n):
    env = gen_cycle_env(n, lam, y_spec, seed)
    rows = []
    for m in m_list:
        t0 = time.perf_counter()
        chain = lattice_truncation(env, m)
        x = chain.index_of((0, 0))
        cap = capacity_prob(chain, [x], [chain.n - 1])
        lb = lemma48_bound(env, m)
        bb = boundary_bound(chain, x, [chain.n - 1], check=False)
        ms = (time.perf_counter() - t0) * 1e3
        rows.append((int(seed), int(m), cap, lb, bb, ms))
    return rows


def run_experiment(lam: float, y_spec: YSpec | None, seeds: Sequence[int], m_list: Sequence[int],
                   n: int | None = None, workers: int = 1) -> list[tuple]:
    """Rows ``(seed, m, cap_exact, lemma48_bound, boundary_bound, runtime_ms)``.

    One environment per seed, of half-width ``max(m_list) + 1`` unless ``n``
    is given. Rows are ordered by seed, then ``m``, whatever the scheduling.
    """
    m_list = sorted(int(m) for m in m_list)
    n = max(m_list) + 1 if n is None else int(n)
    y_spec = YSpec() if y_spec is None else y_spec
    seeds = list(seeds)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda s: _cell(lam, y_spec, s, m_list, n), seeds))
    else:
        parts = [_cell(lam, y_spec, s, m_list, n) for s in seeds]
    rows = [r for p in parts for r in p]
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows
