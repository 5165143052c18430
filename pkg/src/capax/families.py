"""Locally finite chains on the integer lattice.

Each family exposes ``mu``, ``neighbors`` and ``rate`` so that a finite box
can be cut out with :func:`capax.collapse.collapse_exterior`. States are
integer tuples.
"""

from __future__ import annotations

from itertools import product
from typing import Callable

import numpy as np

from .collapse import collapse_exterior
from .chain import ChainModel
from .errors import ValidationError


def lattice_box(m: int, d: int) -> list[tuple]:
    """States of ``[-m, m]^d`` in lexicographic order."""
    return list(product(range(-m, m + 1), repeat=d))


def _unit_vectors(d: int) -> list[tuple]:
    out = []
    for k in range(d):
        for s in (1, -1):
            e = [0] * d
            e[k] = s
            out.append(tuple(e))
    return out


class NearestNeighborWalk:
    """Walk on ``Z^d`` jumping ``+e_k`` at rate ``up`` and ``-e_k`` at rate ``down``.

    The stationary measure is ``prod_k (up/down)^{x_k}``; with ``up == down``
    it is identically one. ``up = down = 1`` is the unit-conductance simple
    walk; ``up = down = 1/(2d)`` the discrete-time one.
    """

    def __init__(self, d: int = 2, up: float = 1.0, down: float | None = None):
        if d < 1:
            raise ValidationError("dimension must be positive")
        down = up if down is None else down
        if up <= 0 or down <= 0:
            raise ValidationError("rates must be positive")
        self.d = int(d)
        self.up = float(up)
        self.down = float(down)
        self._steps = _unit_vectors(self.d)
        self._ratio = self.up / self.down

    def mu(self, x) -> float:
        return float(self._ratio ** sum(x)) if self._ratio != 1.0 else 1.0

    def neighbors(self, x):
        return [tuple(a + b for a, b in zip(x, e)) for e in self._steps]

    def rate(self, x, y) -> float:
        diff = [b - a for a, b in zip(x, y)]
        if sum(abs(v) for v in diff) != 1:
            return 0.0
        return self.up if sum(diff) == 1 else self.down

    def box(self, m: int) -> list[tuple]:
        return lattice_box(m, self.d)

    def origin(self) -> tuple:
        return (0,) * self.d


class MetropolisWalk:
    """Reversible walk with stationary measure ``exp(-V)``.

    Rates ``r(x, y) = min(1, exp(V(x) - V(y))) / (2d)`` to each neighbour.
    """

    def __init__(self, potential: Callable[[tuple], float], d: int = 2):
        self.V = potential
        self.d = int(d)
        self._steps = _unit_vectors(self.d)

    def mu(self, x) -> float:
        return float(np.exp(-self.V(x)))

    def neighbors(self, x):
        return [tuple(a + b for a, b in zip(x, e)) for e in self._steps]

    def rate(self, x, y) -> float:
        if sum(abs(b - a) for a, b in zip(x, y)) != 1:
            return 0.0
        return float(min(1.0, np.exp(self.V(x) - self.V(y)))) / (2 * self.d)

    def box(self, m: int) -> list[tuple]:
        return lattice_box(m, self.d)

    def origin(self) -> tuple:
        return (0,) * self.d


def truncate(family, m: int) -> ChainModel:
    """Box ``[-m, m]^d`` of a lattice family with its exterior collapsed to ``@d``."""
    return collapse_exterior(family, family.box(m))
