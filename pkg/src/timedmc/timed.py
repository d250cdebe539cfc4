"""Deterministic timed automata: guards, validation, stepping, time bounds.

Clocks are referenced by index into ``Dta.clocks``; valuations are 1-D float
arrays of the same length.  Guards are conjunctions of atoms ``x op c`` with
integer constants, so their satisfaction sets are axis-aligned boxes and all
emptiness/overlap questions reduce to per-clock interval arithmetic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import Union

import numpy as np

COMPARATORS = ("<", "<=", ">", ">=")


class DeterminismError(ValueError):
    """Two edges from one location/symbol have overlapping guard interiors."""


@dataclass(frozen=True)
class Interval:
    """A real interval with individually open or closed endpoints."""

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and (self.lo_open or self.hi_open)

    def has_interior(self) -> bool:
        return self.lo < self.hi

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and self.lo_open:
            return False
        if x == self.hi and self.hi_open:
            return False
        return True

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo:
            lo, lo_open = self.lo, self.lo_open
        elif other.lo > self.lo:
            lo, lo_open = other.lo, other.lo_open
        else:
            lo, lo_open = self.lo, self.lo_open or other.lo_open
        if self.hi < other.hi:
            hi, hi_open = self.hi, self.hi_open
        elif other.hi < self.hi:
            hi, hi_open = other.hi, other.hi_open
        else:
            hi, hi_open = self.hi, self.hi_open or other.hi_open
        return Interval(lo, hi, lo_open, hi_open)


NONNEGATIVE_REALS = Interval(0.0, math.inf, hi_open=True)


@dataclass(frozen=True)
class ClockAtom:
    """A single comparison ``clock op const`` with a natural constant."""

    clock: int
    op: str
    const: int

    def __post_init__(self) -> None:
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")
        if not isinstance(self.const, int) or isinstance(self.const, bool):
            raise ValueError(f"guard constant must be an integer, got {self.const!r}")
        if self.const < 0:
            raise ValueError(f"guard constant must be a natural number, got {self.const}")
        if self.clock < 0:
            raise ValueError(f"clock index must be nonnegative, got {self.clock}")

    def satisfied(self, value: float) -> bool:
        if self.op == "<":
            return value < self.const
        if self.op == "<=":
            return value <= self.const
        if self.op == ">":
            return value > self.const
        return value >= self.const

    def value_interval(self) -> Interval:
        """Clock values satisfying the atom, within [0, inf)."""
        if self.op == "<":
            return Interval(0.0, self.const, hi_open=True)
        if self.op == "<=":
            return Interval(0.0, self.const)
        if self.op == ">":
            return Interval(self.const, math.inf, lo_open=True, hi_open=True)
        return Interval(self.const, math.inf, hi_open=True)


@dataclass(frozen=True)
class ClockConstraint:
    """A conjunction of atoms; the empty conjunction is ``true``."""

    atoms: tuple[ClockAtom, ...] = ()

    def satisfied(self, eta: np.ndarray) -> bool:
        return all(atom.satisfied(float(eta[atom.clock])) for atom in self.atoms)

    def clock_interval(self, clock: int) -> Interval:
        """The set of values of one clock compatible with the constraint."""
        box = NONNEGATIVE_REALS
        for atom in self.atoms:
            if atom.clock == clock:
                box = box.intersect(atom.value_interval())
        return box

    def constants(self) -> tuple[int, ...]:
        return tuple(atom.const for atom in self.atoms)


TRUE = ClockConstraint()


@dataclass(frozen=True)
class FiniteAcceptance:
    """Accept on reaching any location of the given set (all sinks)."""

    locations: frozenset[str]


@dataclass(frozen=True)
class MullerAcceptance:
    """Accept iff the set of locations visited infinitely often is a member."""

    family: tuple[frozenset[str], ...]


Acceptance = Union[FiniteAcceptance, MullerAcceptance]


@dataclass(frozen=True)
class DtaEdge:
    source: str
    symbol: frozenset[str]
    guard: ClockConstraint
    resets: frozenset[int]
    target: str


@dataclass(frozen=True)
class Dta:
    """A deterministic timed automaton over AP-set symbols.

    Structural well-formedness (references exist, indices in range) is
    enforced at construction; semantic checks (determinism, sink
    normalization) live in :func:`validate_dta`.
    """

    clocks: tuple[str, ...]
    locations: tuple[str, ...]
    initial: str
    edges: tuple[DtaEdge, ...]
    acceptance: Acceptance

    def __post_init__(self) -> None:
        locs = set(self.locations)
        if len(locs) != len(self.locations):
            raise ValueError("duplicate location names")
        if len(set(self.clocks)) != len(self.clocks):
            raise ValueError("duplicate clock names")
        if self.initial not in locs:
            raise ValueError(f"initial location {self.initial!r} not declared")
        n = len(self.clocks)
        for e in self.edges:
            if e.source not in locs or e.target not in locs:
                raise ValueError(f"edge references undeclared location: {e.source!r} -> {e.target!r}")
            for atom in e.guard.atoms:
                if atom.clock >= n:
                    raise ValueError(f"guard references clock index {atom.clock} out of range")
            if any(x >= n or x < 0 for x in e.resets):
                raise ValueError("reset references clock index out of range")
        if isinstance(self.acceptance, FiniteAcceptance):
            extra = self.acceptance.locations - locs
        else:
            extra = set().union(*self.acceptance.family, frozenset()) - locs
        if extra:
            raise ValueError(f"acceptance references undeclared locations: {sorted(extra)}")

    @property
    def n_clocks(self) -> int:
        return len(self.clocks)

    @cached_property
    def clock_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.clocks)}

    @cached_property
    def edges_by_source_symbol(self) -> dict[tuple[str, frozenset[str]], tuple[DtaEdge, ...]]:
        out: dict[tuple[str, frozenset[str]], list[DtaEdge]] = {}
        for e in self.edges:
            out.setdefault((e.source, e.symbol), []).append(e)
        return {k: tuple(v) for k, v in out.items()}


@dataclass(frozen=True)
class ValidatedDta:
    """Result of :func:`validate_dta`: a normalized automaton plus warnings."""

    dta: Dta
    warnings: tuple[str, ...] = ()


def max_constant(a: Dta) -> int:
    """The largest constant appearing in any guard (0 if there are none)."""
    return max((c for e in a.edges for c in e.guard.constants()), default=0)


def _guards_overlap(g1: ClockConstraint, g2: ClockConstraint, n_clocks: int) -> tuple[bool, bool]:
    """Whether the two guard boxes intersect, and with nonempty interior."""
    overlap, interior = True, True
    for x in range(n_clocks):
        meet = g1.clock_interval(x).intersect(g2.clock_interval(x))
        if meet.is_empty():
            return False, False
        if not meet.has_interior():
            interior = False
    return overlap, interior


def _guard_has_interior(g: ClockConstraint, n_clocks: int) -> bool:
    return all(g.clock_interval(x).has_interior() for x in range(n_clocks))


def validate_dta(a: Dta) -> ValidatedDta:
    """Check determinism and normalize accepting locations to sinks.

    Raises :class:`DeterminismError` when two edges from the same location
    and symbol have guards whose intersection has nonempty interior.
    Touching guards (measure-zero overlap) and guards whose own satisfaction
    set has empty interior only produce warnings, since Markovian jumps hit
    them with probability zero.
    """
    warnings: list[str] = []
    edges = a.edges
    if isinstance(a.acceptance, FiniteAcceptance):
        kept = []
        for e in edges:
            if e.source in a.acceptance.locations:
                warnings.append(
                    f"dropped edge out of accepting location {e.source!r} (sink normalization)"
                )
            else:
                kept.append(e)
        if len(kept) != len(edges):
            edges = tuple(kept)
            a = replace(a, edges=edges)

    by_key: dict[tuple[str, frozenset[str]], list[DtaEdge]] = {}
    for e in edges:
        by_key.setdefault((e.source, e.symbol), []).append(e)
    hard: list[str] = []
    for (src, symbol), group in by_key.items():
        for e1, e2 in itertools.combinations(group, 2):
            overlap, interior = _guards_overlap(e1.guard, e2.guard, a.n_clocks)
            if not overlap:
                continue
            desc = (
                f"location {src!r}, symbol {set(symbol) or '{}'}: guards of edges to "
                f"{e1.target!r} and {e2.target!r} overlap"
            )
            if interior:
                hard.append(desc)
            else:
                warnings.append(desc + " on a measure-zero set")
    if hard:
        raise DeterminismError("; ".join(hard))

    for e in edges:
        if not _guard_has_interior(e.guard, a.n_clocks):
            warnings.append(
                f"guard on edge {e.source!r} -> {e.target!r} has empty interior; "
                "it is satisfied with probability zero"
            )
    return ValidatedDta(dta=a, warnings=tuple(warnings))


def guard_enabled_interval(g: ClockConstraint, eta: np.ndarray) -> Interval | None:
    """The delays tau >= 0 with eta + tau satisfying g, or None if empty.

    Guards are boxes and all clocks advance at rate 1, so the enabled set is
    a single interval; its endpoints are constants minus clock values.
    """
    window = NONNEGATIVE_REALS
    for atom in g.atoms:
        bound = atom.const - float(eta[atom.clock])
        if atom.op == "<":
            piece = Interval(-math.inf, bound, lo_open=True, hi_open=True)
        elif atom.op == "<=":
            piece = Interval(-math.inf, bound, lo_open=True)
        elif atom.op == ">":
            piece = Interval(bound, math.inf, lo_open=True, hi_open=True)
        else:
            piece = Interval(bound, math.inf, hi_open=True)
        window = window.intersect(piece)
        if window.is_empty():
            return None
    return window


def dta_step(
    a: Dta, q: str, eta: np.ndarray, symbol: frozenset[str], t: float
) -> tuple[str, np.ndarray] | None:
    """Advance time by t in location q, then take the unique enabled edge.

    Returns the target location and the reset-updated valuation, or None if
    no edge with this symbol is enabled (the run is stuck and rejecting).
    """
    if t <= 0:
        raise ValueError(f"delay must be positive, got {t}")
    eta_t = eta + t
    matches = [
        e
        for e in a.edges_by_source_symbol.get((q, symbol), ())
        if e.guard.satisfied(eta_t)
    ]
    if not matches:
        return None
    if len(matches) > 1:
        raise RuntimeError(
            f"determinism violated at location {q!r}: {len(matches)} enabled edges "
            "(validator bug)"
        )
    edge = matches[0]
    if edge.resets:
        eta_t = eta_t.copy()
        eta_t[list(edge.resets)] = 0.0
    return edge.target, eta_t


def time_bound_transform(a: Dta, t_f) -> tuple[Dta, int]:
    """Strengthen acceptance with a global deadline t_f on a fresh clock.

    A fresh clock z (never reset) is added and every edge into an accepting
    location gains the conjunct z <= t_f.  Rational deadlines are supported
    by scaling every constant and t_f to integers; the returned scale factor
    k means all model rates must be divided by k (equivalently, all times
    multiplied by k) for probabilities to be preserved.
    """
    if not isinstance(a.acceptance, FiniteAcceptance):
        raise ValueError("time bound requires finite acceptance")
    bound = Fraction(str(t_f)) if isinstance(t_f, float) else Fraction(t_f)
    if bound <= 0:
        raise ValueError(f"time bound must be positive, got {t_f}")
    scale = bound.denominator
    z_name = "z"
    while z_name in a.clocks:
        z_name += "_"
    z = len(a.clocks)
    deadline = int(bound * scale)
    accepting = a.acceptance.locations

    def scaled(g: ClockConstraint, into_accepting: bool) -> ClockConstraint:
        atoms = tuple(replace(at, const=at.const * scale) for at in g.atoms)
        if into_accepting:
            atoms += (ClockAtom(clock=z, op="<=", const=deadline),)
        return ClockConstraint(atoms)

    edges = tuple(
        replace(e, guard=scaled(e.guard, e.target in accepting)) for e in a.edges
    )
    return replace(a, clocks=a.clocks + (z_name,), edges=edges), scale
