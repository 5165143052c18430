"""Command-line entry point.

Every subcommand writes its result to ``--out`` (or stdout). Failures are
reported as a JSON object ``{"error": ..., "message": ...}`` on stderr with
a nonzero exit status: 1 for failed verification, 2 for invalid input, 3 for
any other detected violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainModel, label_str
from .config import TOL
from .errors import CapaxError, ParseError, SetsIntersect, ToleranceExceeded, ValidationError
from .fileio import chain_to_dict, csv_text, dumps, load_chain
from .flows.algebra import feasibility_residuals
from .flows.thomson import optimal_flow
from .montecarlo import SimConfig, estimate_current, estimate_escape
from .potentials import current, equilibrium_potential, green_killed, potential_rows
from .recurrence import EXPERIMENT_COLUMNS, YSpec, run_experiment
from .report import ROUTES, capacity_report, verify_report


def split_labels(text: str) -> list[str]:
    """Split ``a,b,(1,2)`` on commas that are not inside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ParseError(f"unbalanced parentheses in {text!r}")
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ParseError(f"unbalanced parentheses in {text!r}")
    out.append("".join(cur).strip())
    return [s for s in out if s]


def parse_int_list(text: str) -> list[int]:
    """``8,16,32`` or ``1..10`` (inclusive) or a mix of both."""
    vals = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..")
                vals.extend(range(int(lo), int(hi) + 1))
            else:
                vals.append(int(part))
        except ValueError as exc:
            raise ParseError(f"cannot parse integer list {text!r}") from exc
    if not vals:
        raise ParseError(f"empty integer list {text!r}")
    return vals


def _set(chain: ChainModel, specs, name: str) -> np.ndarray:
    if not specs:
        raise ValidationError(f"set {name} is required")
    labels = [lab for s in specs for lab in split_labels(s)]
    return chain.indices(labels)


def _pair(chain: ChainModel, args) -> tuple[np.ndarray, np.ndarray]:
    A = _set(chain, args.A, "A")
    B = _set(chain, args.B, "B")
    if np.intersect1d(A, B).size:
        raise SetsIntersect("A and B must be disjoint")
    return A, B


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _labels(chain: ChainModel) -> list[str]:
    return [label_str(lab) for lab in chain.labels]


# ----------------------------------------------------------------------------
# subcommands


def cmd_stationary(args) -> int:
    chain = load_chain(args.input)
    _emit(dumps(chain_to_dict(chain)) + "\n", args.out)
    return 0


def cmd_capacity(args) -> int:
    chain = load_chain(args.input)
    A, B = _pair(chain, args)
    routes = split_labels(args.routes)
    rep = capacity_report(chain, A, B, routes=routes)
    doc = rep.to_dict()
    if args.potentials:
        sol = equilibrium_potential(chain, A, B)
        Path(args.potentials).write_text(csv_text(["state", "label", "V", "V_star", "F"], potential_rows(chain, sol)))
    _emit(dumps(doc) + "\n", args.out)
    return 0


def cmd_verify(args) -> int:
    chain = load_chain(args.input)
    A, B = _pair(chain, args)
    rep = capacity_report(chain, A, B, mc=SimConfig(seed=args.seed, samples=args.samples))
    problems = verify_report(rep, args.tol)
    doc = rep.to_dict()
    doc["tolerance"] = args.tol
    doc["passed"] = not problems
    _emit(dumps(doc) + "\n", args.out)
    if problems:
        raise ToleranceExceeded("; ".join(problems))
    return 0


def cmd_flows(args) -> int:
    chain = load_chain(args.input)
    A, B = _pair(chain, args)
    labels = _labels(chain)
    if args.kind == "optimal":
        _, phi = optimal_flow(chain, A, B)
    else:
        phi = current(chain, A, B)
    res = feasibility_residuals(phi, A, B)
    if args.csv:
        Path(args.csv).write_text(csv_text(["from", "to", "value"], phi.rows(labels)))
    doc = {"kind": args.kind, "flow": phi.rows(labels), "feasibility": res}
    _emit(dumps(doc) + "\n", args.out)
    return 0


def cmd_mc(args) -> int:
    chain = load_chain(args.input)
    A, B = _pair(chain, args)
    cfg = SimConfig(seed=args.seed, samples=args.samples, max_steps=args.max_steps)
    labels = _labels(chain)
    if args.what == "escape":
        doc = estimate_escape(chain, A, B, cfg).to_dict(labels)
    else:
        est = estimate_current(chain, A, B, cfg)
        rows = est.mean.rows(labels)
        doc = {
            "current": [[r[0], r[1], r[2], float(se)] for r, se in zip(rows, est.std_error)],
            "samples_used": est.samples_used,
        }
    _emit(dumps(doc) + "\n", args.out)
    return 0


def cmd_green(args) -> int:
    chain = load_chain(args.input)
    B = _set(chain, args.B, "B")
    G = green_killed(chain, B)
    labels = _labels(chain)
    interior = [int(i) for i in G.interior]
    if args.x:
        x = chain.index_of(args.x)
        rows = {labels[x]: [float(v) for v in G.row(x)[interior]]}
    else:
        D = G.dense()
        rows = {labels[i]: [float(v) for v in D[i, interior]] for i in interior}
    doc = {"B": [labels[i] for i in B], "columns": [labels[i] for i in interior], "G": rows}
    _emit(dumps(doc) + "\n", args.out)
    return 0


def cmd_recurrence(args) -> int:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read experiment config: {exc}") from exc
    lam = args.lam if args.lam is not None else cfg.get("lambda")
    if lam is None:
        raise ValidationError("lambda is required (--lambda or config)")
    if args.delta is not None:
        y_spec = YSpec(delta=args.delta)
    elif "Y_spec" in cfg:
        try:
            y_spec = YSpec.from_dict(cfg["Y_spec"])
        except TypeError as exc:
            raise ParseError(f"bad Y_spec: {exc}") from exc
    else:
        y_spec = YSpec()
    seeds = parse_int_list(args.seeds) if args.seeds else cfg.get("seeds", [0])
    m_list = parse_int_list(args.m) if args.m else cfg.get("m_list")
    if not m_list:
        raise ValidationError("box sizes are required (--m or config)")
    rows = run_experiment(float(lam), y_spec, seeds, m_list, workers=args.workers)
    _emit(csv_text(list(EXPERIMENT_COLUMNS), [list(r) for r in rows]), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capax", description="Capacities of non-reversible Markov chains.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def chain_cmd(name, help_, pair=True):
        q = sub.add_parser(name, help=help_)
        q.add_argument("--in", dest="input", required=True, help="chain JSON file")
        q.add_argument("--out", help="output file (default: stdout)")
        if pair:
            q.add_argument("--A", action="append", help="labels of A (comma separated, may repeat)")
            q.add_argument("--B", action="append", help="labels of B (comma separated, may repeat)")
        return q

    q = chain_cmd("stationary", "stationary measure and derived fields", pair=False)
    q.set_defaults(func=cmd_stationary)

    q = chain_cmd("capacity", "capacity by the selected routes")
    q.add_argument("--routes", default=",".join(ROUTES), help="subset of prob,minmax,flow")
    q.add_argument("--potentials", help="also write V, V_star, F as CSV here")
    q.set_defaults(func=cmd_capacity)

    q = chain_cmd("verify", "all routes plus Monte Carlo; nonzero exit on disagreement")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--tol", type=float, default=TOL.cross_route)
    q.set_defaults(func=cmd_verify)

    q = chain_cmd("flows", "optimal flow (or unit current) with feasibility residuals")
    q.add_argument("--kind", choices=("optimal", "current"), default="optimal")
    q.add_argument("--csv", help="also write the flow as CSV here")
    q.set_defaults(func=cmd_flows)

    q = chain_cmd("mc", "Monte Carlo escape or current estimates")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--max-steps", type=int, default=None)
    q.add_argument("--what", choices=("escape", "current"), default="escape")
    q.set_defaults(func=cmd_mc)

    q = sub.add_parser("green", help="Green function of the skeleton killed at B")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--out")
    q.add_argument("--B", action="append", required=True)
    q.add_argument("--x", help="only the row of this state")
    q.set_defaults(func=cmd_green)

    q = sub.add_parser("recurrence", help="capacity decay experiment on random cycle environments")
    q.add_argument("--lambda", dest="lam", type=float)
    q.add_argument("--delta", type=float, help="lower bound of Y (Y = delta + Exp(1))")
    q.add_argument("--m", help="box half-widths, e.g. 8,16,32")
    q.add_argument("--seeds", help="seeds, e.g. 1..10 or 1,2,3")
    q.add_argument("--config", help="experiment JSON {lambda, Y_spec, seeds, m_list}")
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--out")
    q.set_defaults(func=cmd_recurrence)
    return p


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToleranceExceeded as exc:
        return _fail(exc, 1)
    except (ValidationError, OSError) as exc:
        return _fail(exc, 2)
    except CapaxError as exc:
        return _fail(exc, 3)


if __name__ == "__main__":
    sys.exit(main())
