"""Cross-route capacity reports."""

from __future__ import annotations

from .chain import ChainModel, label_str
from .config import TOL
from .errors import ToleranceExceeded, ValidationError
from .flows.thomson import capacity_flow
from .montecarlo import SimConfig, estimate_escape
from .potentials import CapacityReport, capacity_prob, capacity_prob_reversed, validate_pair
from .variational import capacity_minmax

ROUTES = ("prob", "minmax", "flow")


def capacity_report(chain: ChainModel, A, B, routes=ROUTES, mc: SimConfig | None = None,
                    reversed_route: bool = True) -> CapacityReport:
    """Capacity by each requested route, optionally with a Monte Carlo estimate."""
    routes = tuple(routes)
    bad = set(routes) - set(ROUTES)
    if bad:
        raise ValidationError(f"unknown routes {sorted(bad)}")
    A, B = validate_pair(chain, A, B)
    rep = CapacityReport(
        A=[label_str(chain.labels[i]) for i in A],
        B=[label_str(chain.labels[i]) for i in B],
        value_prob=capacity_prob(chain, A, B),
    )
    if "minmax" in routes:
        rep.value_minmax = capacity_minmax(chain, A, B)
    if "flow" in routes:
        rep.value_flow = capacity_flow(chain, A, B)
    if reversed_route:
        rep.value_reversed = capacity_prob_reversed(chain, A, B)
    if mc is not None:
        est = estimate_escape(chain, A, B, mc).capacity
        rep.mc_estimate = (est.mean, est.half_width_95)
    return rep


def verify_report(rep: CapacityReport, tol: float = TOL.cross_route, sigmas: float = 3.0) -> list[str]:
    """Reasons the report fails verification (empty when it passes)."""
    problems = []
    if rep.max_rel_dev > tol:
        problems.append(f"routes disagree: max relative deviation {rep.max_rel_dev:.3e} > {tol:.1e}")
    if rep.mc_estimate is not None:
        mean, hw = rep.mc_estimate
        se = hw / 1.959963984540054
        if abs(mean - rep.value_prob) > sigmas * se:
            problems.append(
                f"Monte Carlo estimate {mean!r} is more than {sigmas} standard errors from {rep.value_prob!r}"
            )
    return problems


def verify(chain: ChainModel, A, B, seed: int, samples: int = 100_000, tol: float = TOL.cross_route) -> CapacityReport:
    rep = capacity_report(chain, A, B, mc=SimConfig(seed=seed, samples=samples))
    problems = verify_report(rep, tol)
    if problems:
        raise ToleranceExceeded("; ".join(problems))
    return rep
