"""JSON and CSV ingestion/emission.

Floats are always written with 17 significant digits so that outputs of two
runs can be diffed byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .chain import ChainModel, build_chain, conductances, label_str
from .errors import ParseError


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite value {x!r} cannot be serialized")
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def chain_from_dict(doc: dict) -> ChainModel:
    try:
        states = [str(s) for s in doc["states"]]
        raw = doc["rates"]
    except (KeyError, TypeError) as exc:
        raise ParseError("chain document needs 'states' and 'rates'") from exc
    index = {s: i for i, s in enumerate(states)}
    if len(index) != len(states):
        raise ParseError("duplicate state labels")
    triples = []
    for entry in raw:
        try:
            a, b, v = entry
            triples.append((index[str(a)], index[str(b)], float(v)))
        except KeyError as exc:
            raise ParseError(f"rate entry references unknown state {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed rate entry {entry!r}") from exc
    mu = doc.get("mu")
    return build_chain(triples, mu=mu, n=len(states), labels=states)


def load_chain(path: str | Path) -> ChainModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return chain_from_dict(doc)


def chain_to_dict(chain: ChainModel, derived: bool = True) -> dict:
    labels = [label_str(lab) for lab in chain.labels]
    R = chain.rates.tocoo()
    order = np.lexsort((R.col, R.row))
    doc = {
        "states": labels,
        "rates": [[labels[R.row[k]], labels[R.col[k]], float(R.data[k])] for k in order],
        "mu": [float(v) for v in chain.mu],
    }
    if derived:
        g = conductances(chain)
        doc["normalized"] = chain.normalized
        doc["holding"] = [float(v) for v in chain.holding]
        doc["M"] = [float(v) for v in chain.M]
        doc["c_a_edges"] = [
            [labels[t], labels[h], float(a)] for t, h, a in zip(g.tail, g.head, g.ca) if a != 0
        ]
    return doc


def dump_chain(chain: ChainModel, path: str | Path | None = None, derived: bool = True) -> str:
    text = dumps(chain_to_dict(chain, derived=derived)) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row])
    return buf.getvalue()
