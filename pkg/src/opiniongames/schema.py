"""
JSON game files.

Top level: ``{schema_version, kind, persons, edges, cliques?, unsafe_indefinite?}``
with ``kind`` one of "quadratic", "heterogeneous", "clique".  Quadratic persons
carry ``{dim, R, s}`` and edges ``{i, j, W}``; heterogeneous persons carry
``{dim, R, s, g}`` (``g`` null for no internal cost) and edges ``{i, j, f, A, B}``.
Matrices are row-major nested lists.  Floats are written with ``repr``, the
shortest decimal that round-trips, so parse(emit(game)) is bit-exact.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .clique import CliqueGame
from .cost_fn import from_dict
from .game import HeterogeneousGame, InternalCost, PairCost, QuadraticGame

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """A game file does not follow the schema."""


def _mat(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _hetero_fields(g: HeterogeneousGame) -> dict:
    persons = []
    for m, ic in zip(g.dims, g.internal):
        rec = {"dim": m}
        if ic is None:
            rec["g"] = None
        else:
            rec.update(R=_mat(ic.R), s=_mat(ic.s), g=ic.g.to_dict())
        persons.append(rec)
    edges = [
        {"i": i, "j": j, "f": pc.f.to_dict(), "A": _mat(pc.A), "B": _mat(pc.B)}
        for (i, j), pc in sorted(g.pairwise.items())
    ]
    return {"persons": persons, "edges": edges}


def emit(game) -> dict:
    """Game object -> JSON-ready dict."""
    if isinstance(game, QuadraticGame):
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": "quadratic",
            "persons": [{"dim": game.m, "R": _mat(r), "s": _mat(s)} for r, s in zip(game.R, game.s)],
            "edges": [{"i": i, "j": j, "W": _mat(w)} for (i, j), w in sorted(game.W.items())],
        }
        if game.unsafe_indefinite:
            out["unsafe_indefinite"] = True
        return out
    if isinstance(game, CliqueGame):
        return {"schema_version": SCHEMA_VERSION, "kind": "clique", **_hetero_fields(game.base),
                "cliques": [list(c) for c in game.partition]}
    if isinstance(game, HeterogeneousGame):
        return {"schema_version": SCHEMA_VERSION, "kind": "heterogeneous", **_hetero_fields(game)}
    raise TypeError(f"cannot serialize {type(game).__name__}")


def dumps(game) -> str:
    return json.dumps(emit(game), indent=1, allow_nan=False) + "\n"


def dump(game, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(game))


def _req(rec: dict, key: str, where: str) -> Any:
    if not isinstance(rec, dict) or key not in rec:
        raise SchemaError(f"{where}: missing field {key!r}")
    return rec[key]


def _parse_hetero(doc: dict) -> HeterogeneousGame:
    persons = _req(doc, "persons", "game")
    dims, internal = [], []
    for k, p in enumerate(persons):
        dims.append(int(_req(p, "dim", f"person {k}")))
        g = p.get("g")
        if g is None:
            internal.append(None)
        else:
            internal.append(InternalCost(from_dict(g), _req(p, "R", f"person {k}"),
                                         _req(p, "s", f"person {k}")))
    pairwise = {}
    for k, e in enumerate(_req(doc, "edges", "game")):
        key = (int(_req(e, "i", f"edge {k}")), int(_req(e, "j", f"edge {k}")))
        if key in pairwise:
            raise SchemaError(f"edge {key} listed twice")
        pairwise[key] = PairCost(from_dict(_req(e, "f", f"edge {k}")),
                                 _req(e, "A", f"edge {k}"), _req(e, "B", f"edge {k}"))
    return HeterogeneousGame(dims, internal, pairwise)


def parse(doc: dict):
    """JSON dict -> game object; every failure surfaces as SchemaError."""
    try:
        if not isinstance(doc, dict):
            raise SchemaError("top level must be an object")
        version = _req(doc, "schema_version", "game")
        if version != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {version!r}")
        kind = _req(doc, "kind", "game")
        if kind == "quadratic":
            persons = _req(doc, "persons", "game")
            dims = {int(_req(p, "dim", f"person {k}")) for k, p in enumerate(persons)}
            if len(dims) > 1:
                raise SchemaError("quadratic games need one shared dimension")
            m = dims.pop() if dims else 1
            W = {}
            for k, e in enumerate(_req(doc, "edges", "game")):
                key = (int(_req(e, "i", f"edge {k}")), int(_req(e, "j", f"edge {k}")))
                if key in W:
                    raise SchemaError(f"edge {key} listed twice")
                W[key] = _req(e, "W", f"edge {k}")
            return QuadraticGame(
                m,
                [_req(p, "R", f"person {k}") for k, p in enumerate(persons)],
                [_req(p, "s", f"person {k}") for k, p in enumerate(persons)],
                W,
                unsafe_indefinite=bool(doc.get("unsafe_indefinite", False)),
            )
        if kind == "heterogeneous":
            return _parse_hetero(doc)
        if kind == "clique":
            return CliqueGame(_parse_hetero(doc), _req(doc, "cliques", "game"))
        raise SchemaError(f"unknown game kind {kind!r}")
    except SchemaError:
        raise
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        raise SchemaError(str(exc)) from exc


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return parse(doc)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
