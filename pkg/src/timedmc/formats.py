"""JSON interchange for CTMCs and deterministic timed automata.

CTMC documents look like::

    {
      "states": [{"id": "s0", "labels": ["a"], "rate": 1.0}, ...],
      "initial": "s0",
      "transitions": [{"from": "s0", "to": "s1", "prob": 1.0}, ...]
    }

A state with no listed outgoing transition receives an implicit self-loop
with probability one, so absorbing states need no boilerplate; the embedded
jump chain must be stochastic either way.

DTA documents look like::

    {
      "clocks": ["x"],
      "locations": ["q0", "q1"],
      "initial": "q0",
      "acceptance": {"kind": "finite", "locations": ["q1"]},
      "edges": [
        {"from": "q0", "symbol": ["a"],
         "guard": [{"clock": "x", "op": "<", "const": 1}],
         "resets": [], "to": "q1"}
      ]
    }

Muller acceptance is written ``{"kind": "muller", "family": [["q0", "q2"]]}``.
``symbol`` lists the atomic propositions of the label set the edge reads; an
omitted or empty ``guard`` means *true*, an omitted ``resets`` resets nothing.

All schema violations raise :class:`FormatError` carrying the source file and
a field path such as ``edges[2].guard[0].const``.  ``load`` inverts ``save``
exactly: round-tripping reproduces an equal model.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .markov import Ctmc
from .timed import (
    ClockAtom,
    ClockConstraint,
    Dta,
    DtaEdge,
    FiniteAcceptance,
    MullerAcceptance,
)

__all__ = [
    "FormatError",
    "ctmc_from_dict",
    "ctmc_to_dict",
    "dta_from_dict",
    "dta_to_dict",
    "load_ctmc",
    "load_dta",
    "save_ctmc",
    "save_dta",
]

COMPARATORS = ("<", "<=", ">", ">=")


class FormatError(ValueError):
    """A model document violates the JSON interchange schema.

    Attributes
    ----------
    source : str or None
        The file the document came from, when loaded from disk.
    field : str or None
        Path of the offending field inside the document.
    """

    def __init__(self, message: str, *, source: str | None = None, field: str | None = None):
        self.source = source
        self.field = field
        prefix = ""
        if source:
            prefix += f"{source}: "
        if field:
            prefix += f"{field}: "
        super().__init__(prefix + message)


def _as_object(value: Any, field: str | None, source: str | None) -> dict:
    if not isinstance(value, dict):
        raise FormatError(
            f"expected an object, got {type(value).__name__}", source=source, field=field
        )
    return value

def _no_extras(obj: dict, allowed: set[str], field: str | None, source: str | None) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise FormatError(f"unknown fields {unknown}", source=source, field=field)


def _string(value: Any, field: str, source: str | None) -> str:
    if not isinstance(value, str) or not value:
        raise FormatError("expected a nonempty string", source=source, field=field)
    return value


def _number(value: Any, field: str, source: str | None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError("expected a number", source=source, field=field)
    value = float(value)
    if not math.isfinite(value):
        raise FormatError("expected a finite number", source=source, field=field)
    return value


def _string_list(value: Any, field: str, source: str | None) -> list[str]:
    if not isinstance(value, list):
        raise FormatError("expected an array of strings", source=source, field=field)
    for j, item in enumerate(value):
        if not isinstance(item, str) or not item:
            raise FormatError(
                "expected a nonempty string", source=source, field=f"{field}[{j}]"
            )
    return value


def _unique_names(names: list[str], field: str, source: str | None) -> None:
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise FormatError(f"duplicate name {name!r}", source=source, field=field)
        seen.add(name)


# ---------------------------------------------------------------------------
# CTMC documents
# ---------------------------------------------------------------------------


def ctmc_from_dict(doc: Any, source: str | None = None) -> Ctmc:
    """Build a :class:`~timedmc.Ctmc` from a parsed JSON document."""
    doc = _as_object(doc, None, source)
    _no_extras(doc, {"states", "initial", "transitions"}, None, source)
    if "states" not in doc:
        raise FormatError("missing required field", source=source, field="states")
    if not isinstance(doc["states"], list) or not doc["states"]:
        raise FormatError("expected a nonempty array", source=source, field="states")

    ids: list[str] = []
    labels: list[frozenset[str]] = []
    rates: list[float] = []
    for i, entry in enumerate(doc["states"]):
        where = f"states[{i}]"
        entry = _as_object(entry, where, source)
        _no_extras(entry, {"id", "labels", "rate"}, where, source)
        if "id" not in entry:
            raise FormatError("missing required field", source=source, field=f"{where}.id")
        ids.append(_string(entry["id"], f"{where}.id", source))
        labels.append(frozenset(_string_list(entry.get("labels", []), f"{where}.labels", source)))
        if "rate" not in entry:
            raise FormatError("missing required field", source=source, field=f"{where}.rate")
        rate = _number(entry["rate"], f"{where}.rate", source)
        if rate < 0.0:
            raise FormatError("exit rate must be nonnegative", source=source, field=f"{where}.rate")
        rates.append(rate)
    _unique_names(ids, "states", source)
    index = {name: i for i, name in enumerate(ids)}
    n = len(ids)

    if "initial" not in doc:
        raise FormatError("missing required field", source=source, field="initial")
    initial = _string(doc["initial"], "initial", source)
    if initial not in index:
        raise FormatError(f"undeclared state {initial!r}", source=source, field="initial")

    transitions = doc.get("transitions", [])
    if not isinstance(transitions, list):
        raise FormatError("expected an array", source=source, field="transitions")
    P = np.zeros((n, n))
    explicit: set[int] = set()
    seen_pairs: set[tuple[int, int]] = set()
    for i, entry in enumerate(transitions):
        where = f"transitions[{i}]"
        entry = _as_object(entry, where, source)
        _no_extras(entry, {"from", "to", "prob"}, where, source)
        for key in ("from", "to", "prob"):
            if key not in entry:
                raise FormatError("missing required field", source=source, field=f"{where}.{key}")
        src = _string(entry["from"], f"{where}.from", source)
        dst = _string(entry["to"], f"{where}.to", source)
        if src not in index:
            raise FormatError(f"undeclared state {src!r}", source=source, field=f"{where}.from")
        if dst not in index:
            raise FormatError(f"undeclared state {dst!r}", source=source, field=f"{where}.to")
        prob = _number(entry["prob"], f"{where}.prob", source)
        if not 0.0 <= prob <= 1.0:
            raise FormatError("probability must lie in [0, 1]", source=source, field=f"{where}.prob")
        pair = (index[src], index[dst])
        if pair in seen_pairs:
            raise FormatError(
                f"duplicate transition {src!r} -> {dst!r}", source=source, field=where
            )
        seen_pairs.add(pair)
        P[pair] = prob
        explicit.add(pair[0])

    for i in range(n):
        if i not in explicit:
            P[i, i] = 1.0
    sums = P.sum(axis=1)
    for i in range(n):
        if abs(sums[i] - 1.0) > 1e-9:
            raise FormatError(
                f"outgoing probabilities of state {ids[i]!r} sum to {float(sums[i])!r}, expected 1",
                source=source,
                field="transitions",
            )

    try:
        return Ctmc(
            labels=tuple(labels),
            jump_matrix=P,
            exit_rates=np.array(rates, dtype=float),
            initial=index[initial],
            names=tuple(ids),
        )
    except ValueError as exc:
        raise FormatError(str(exc), source=source) from exc


def ctmc_to_dict(c: Ctmc) -> dict:
    """Render a CTMC as a plain-JSON document (inverse of :func:`ctmc_from_dict`)."""
    states = [
        {"id": c.names[i], "labels": sorted(c.labels[i]), "rate": float(c.exit_rates[i])}
        for i in range(c.n_states)
    ]
    transitions = [
        {"from": c.names[i], "to": c.names[j], "prob": float(c.jump_matrix[i, j])}
        for i in range(c.n_states)
        for j in range(c.n_states)
        if c.jump_matrix[i, j] > 0.0
    ]
    return {"states": states, "initial": c.names[c.initial], "transitions": transitions}


# ---------------------------------------------------------------------------
# DTA documents
# ---------------------------------------------------------------------------


def _acceptance_from_dict(
    entry: Any, locations: set[str], source: str | None
) -> FiniteAcceptance | MullerAcceptance:
    where = "acceptance"
    entry = _as_object(entry, where, source)
    if "kind" not in entry:
        raise FormatError("missing required field", source=source, field=f"{where}.kind")
    kind = _string(entry["kind"], f"{where}.kind", source)
    if kind == "finite":
        _no_extras(entry, {"kind", "locations"}, where, source)
        if "locations" not in entry:
            raise FormatError(
                "missing required field", source=source, field=f"{where}.locations"
            )
        names = _string_list(entry["locations"], f"{where}.locations", source)
        for j, name in enumerate(names):
            if name not in locations:
                raise FormatError(
                    f"undeclared location {name!r}",
                    source=source,
                    field=f"{where}.locations[{j}]",
                )
        return FiniteAcceptance(frozenset(names))
    if kind == "muller":
        _no_extras(entry, {"kind", "family"}, where, source)
        if "family" not in entry:
            raise FormatError("missing required field", source=source, field=f"{where}.family")
        family = entry["family"]
        if not isinstance(family, list):
            raise FormatError("expected an array of arrays", source=source, field=f"{where}.family")
        members = []
        for k, member in enumerate(family):
            names = _string_list(member, f"{where}.family[{k}]", source)
            for j, name in enumerate(names):
                if name not in locations:
                    raise FormatError(
                        f"undeclared location {name!r}",
                        source=source,
                        field=f"{where}.family[{k}][{j}]",
                    )
            members.append(frozenset(names))
        return MullerAcceptance(tuple(members))
    raise FormatError(
        f"acceptance kind must be 'finite' or 'muller', got {kind!r}",
        source=source,
        field=f"{where}.kind",
    )


def dta_from_dict(doc: Any, source: str | None = None) -> Dta:
    """Build a :class:`~timedmc.Dta` from a parsed JSON document."""
    doc = _as_object(doc, None, source)
    _no_extras(doc, {"clocks", "locations", "initial", "acceptance", "edges"}, None, source)
    for key in ("clocks", "locations", "initial", "acceptance"):
        if key not in doc:
            raise FormatError("missing required field", source=source, field=key)

    clocks = _string_list(doc["clocks"], "clocks", source)
    if not clocks:
        raise FormatError("expected at least one clock", source=source, field="clocks")
    _unique_names(clocks, "clocks", source)
    clock_index = {name: i for i, name in enumerate(clocks)}

    locations = _string_list(doc["locations"], "locations", source)
    if not locations:
        raise FormatError("expected at least one location", source=source, field="locations")
    _unique_names(locations, "locations", source)
    location_set = set(locations)

    initial = _string(doc["initial"], "initial", source)
    if initial not in location_set:
        raise FormatError(f"undeclared location {initial!r}", source=source, field="initial")

    acceptance = _acceptance_from_dict(doc["acceptance"], location_set, source)

    entries = doc.get("edges", [])
    if not isinstance(entries, list):
        raise FormatError("expected an array", source=source, field="edges")
    edges: list[DtaEdge] = []
    for i, entry in enumerate(entries):
        where = f"edges[{i}]"
        entry = _as_object(entry, where, source)
        _no_extras(entry, {"from", "symbol", "guard", "resets", "to"}, where, source)
        for key in ("from", "symbol", "to"):
            if key not in entry:
                raise FormatError("missing required field", source=source, field=f"{where}.{key}")
        src = _string(entry["from"], f"{where}.from", source)
        dst = _string(entry["to"], f"{where}.to", source)
        for name, key in ((src, "from"), (dst, "to")):
            if name not in location_set:
                raise FormatError(
                    f"undeclared location {name!r}", source=source, field=f"{where}.{key}"
                )
        if not isinstance(entry["symbol"], list):
            raise FormatError(
                "expected an array of atomic propositions", source=source, field=f"{where}.symbol"
            )
        symbol = frozenset(_string_list(entry["symbol"], f"{where}.symbol", source))

        atoms: list[ClockAtom] = []
        for j, raw in enumerate(entry.get("guard", [])):
            spot = f"{where}.guard[{j}]"
            raw = _as_object(raw, spot, source)
            _no_extras(raw, {"clock", "op", "const"}, spot, source)
            for key in ("clock", "op", "const"):
                if key not in raw:
                    raise FormatError("missing required field", source=source, field=f"{spot}.{key}")
            clock = _string(raw["clock"], f"{spot}.clock", source)
            if clock not in clock_index:
                raise FormatError(
                    f"undeclared clock {clock!r}", source=source, field=f"{spot}.clock"
                )
            op = _string(raw["op"], f"{spot}.op", source)
            if op not in COMPARATORS:
                raise FormatError(
                    f"comparator must be one of {COMPARATORS}, got {op!r}",
                    source=source,
                    field=f"{spot}.op",
                )
            const = raw["const"]
            if isinstance(const, bool) or not isinstance(const, int):
                raise FormatError(
                    "guard constant must be an integer", source=source, field=f"{spot}.const"
                )
            if const < 0:
                raise FormatError(
                    "guard constant must be a natural number", source=source, field=f"{spot}.const"
                )
            atoms.append(ClockAtom(clock=clock_index[clock], op=op, const=const))

        resets: set[int] = set()
        for j, name in enumerate(_string_list(entry.get("resets", []), f"{where}.resets", source)):
            if name not in clock_index:
                raise FormatError(
                    f"undeclared clock {name!r}", source=source, field=f"{where}.resets[{j}]"
                )
            resets.add(clock_index[name])

        edges.append(
            DtaEdge(
                source=src,
                symbol=symbol,
                guard=ClockConstraint(tuple(atoms)),
                resets=frozenset(resets),
                target=dst,
            )
        )

    try:
        return Dta(
            clocks=tuple(clocks),
            locations=tuple(locations),
            initial=initial,
            edges=tuple(edges),
            acceptance=acceptance,
        )
    except ValueError as exc:
        raise FormatError(str(exc), source=source) from exc


def dta_to_dict(a: Dta) -> dict:
    """Render a DTA as a plain-JSON document (inverse of :func:`dta_from_dict`)."""
    if isinstance(a.acceptance, FiniteAcceptance):
        acceptance: dict = {"kind": "finite", "locations": sorted(a.acceptance.locations)}
    else:
        acceptance = {
            "kind": "muller",
            "family": [sorted(member) for member in a.acceptance.family],
        }
    edges = []
    for e in a.edges:
        entry: dict = {"from": e.source, "symbol": sorted(e.symbol)}
        if e.guard.atoms:
            entry["guard"] = [
                {"clock": a.clocks[atom.clock], "op": atom.op, "const": atom.const}
                for atom in e.guard.atoms
            ]
        if e.resets:
            entry["resets"] = [a.clocks[x] for x in sorted(e.resets)]
        entry["to"] = e.target
        edges.append(entry)
    return {
        "clocks": list(a.clocks),
        "locations": list(a.locations),
        "initial": a.initial,
        "acceptance": acceptance,
        "edges": edges,
    }


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def _load_document(path) -> Any:
    source = str(path)
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise FormatError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", source=source
        ) from exc


def load_ctmc(path) -> Ctmc:
    """Load a CTMC from a JSON file."""
    return ctmc_from_dict(_load_document(path), source=str(path))


def load_dta(path) -> Dta:
    """Load a DTA from a JSON file."""
    return dta_from_dict(_load_document(path), source=str(path))


def _save_document(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2)
        handle.write("\n")


def save_ctmc(c: Ctmc, path) -> None:
    """Write a CTMC to a JSON file; :func:`load_ctmc` inverts it exactly."""
    _save_document(ctmc_to_dict(c), path)


def save_dta(a: Dta, path) -> None:
    """Write a DTA to a JSON file; :func:`load_dta` inverts it exactly."""
    _save_document(dta_to_dict(a), path)
