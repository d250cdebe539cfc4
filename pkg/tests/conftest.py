"""Shared model builders for the test suite."""
from __future__ import annotations

import numpy as np

from timedmc import Ctmc

RUNNING_PROBABILITY = 0.06292428939106452
"""Acceptance probability of the branching example with rates (1, 2, 3, 4).

Derived from an independent ODE integration of the per-interval value
functions (see pdp_value_oracle), which agrees with this figure to 2e-11;
also confirmed by Monte Carlo replay of sampled timed paths.
"""


def branching_ctmc(rates=(1.0, 2.0, 3.0, 4.0)) -> Ctmc:
    """Four-state chain: s0 -> s1; s1 -> {s0: .5, s2: .2, s3: .3}; s2, s3 absorbing.

    Labels: s0, s1 |-> {a}; s2 |-> {b}; s3 |-> {c}.
    """
    P = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.5, 0.0, 0.2, 0.3],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    labels = (frozenset({"a"}), frozenset({"a"}), frozenset({"b"}), frozenset({"c"}))
    return Ctmc(labels=labels, jump_matrix=P, exit_rates=np.array(rates, dtype=float), initial=0)


def cycle_ctmc(rates=(1.0, 2.0, 3.0, 4.0)) -> Ctmc:
    """Four-state chain used with the Muller automaton.

    s0 -> {s1: .4, s3: .6}; s1 -> s2; s2 -> {s1: .3, s3: .7}; s3 -> s2.
    Labels: s0 |-> {b}; s1, s3 |-> {c}; s2 |-> {a}.
    """
    P = np.array(
        [
            [0.0, 0.4, 0.0, 0.6],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.3, 0.0, 0.7],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    labels = (frozenset({"b"}), frozenset({"c"}), frozenset({"a"}), frozenset({"c"}))
    return Ctmc(labels=labels, jump_matrix=P, exit_rates=np.array(rates, dtype=float), initial=0)


def random_ctmc(rng: np.random.Generator, max_states: int = 10, labels_pool=("a", "b", "c")) -> Ctmc:
    """Random small CTMC with branch probabilities bounded away from zero.

    Every transition probability is at least ~0.13, so any positive reachability
    probability over at most 9 jumps stays well above 1e-9 (the qualitative
    consistency threshold used across the suite).
    """
    n = int(rng.integers(2, max_states + 1))
    P = np.zeros((n, n))
    for i in range(n):
        k = int(rng.integers(1, min(3, n) + 1))
        targets = rng.choice(n, size=k, replace=False)
        raw = rng.uniform(0.3, 1.0, size=k)
        P[i, targets] = raw / raw.sum()
    rates = rng.uniform(0.3, 3.0, size=n)
    labels = tuple(frozenset({labels_pool[int(rng.integers(0, len(labels_pool)))]}) for _ in range(n))
    return Ctmc(labels=labels, jump_matrix=P, exit_rates=rates, initial=0)


# ---------------------------------------------------------------------------
# Timed-automaton builders
# ---------------------------------------------------------------------------

from timedmc.timed import (  # noqa: E402
    TRUE,
    ClockAtom,
    ClockConstraint,
    Dta,
    DtaEdge,
    FiniteAcceptance,
    MullerAcceptance,
)


def atom(clock: int, op: str, const: int) -> ClockAtom:
    return ClockAtom(clock=clock, op=op, const=const)


def guard(*atoms: ClockAtom) -> ClockConstraint:
    return ClockConstraint(tuple(atoms))


def sym(*aps: str) -> frozenset[str]:
    return frozenset(aps)


def ab_reach_dta() -> Dta:
    """Single-clock reachability DTA: a-loops below 2, accept a late b.

    q0 --{a},x<1--> q0;  q0 --{a},1<x<2,{x}--> q0;  q0 --{b},x>1--> q1 (accepting).
    """
    edges = (
        DtaEdge("q0", sym("a"), guard(atom(0, "<", 1)), frozenset(), "q0"),
        DtaEdge("q0", sym("a"), guard(atom(0, ">", 1), atom(0, "<", 2)), frozenset({0}), "q0"),
        DtaEdge("q0", sym("b"), guard(atom(0, ">", 1)), frozenset(), "q1"),
    )
    return Dta(
        clocks=("x",),
        locations=("q0", "q1"),
        initial="q0",
        edges=edges,
        acceptance=FiniteAcceptance(frozenset({"q1"})),
    )


def ab_cycle_muller_dta() -> Dta:
    """Single-clock Muller DTA with family {{q0, q2}}."""
    edges = (
        DtaEdge("q0", sym("a"), guard(atom(0, "<", 1)), frozenset(), "q2"),
        DtaEdge("q2", sym("b"), TRUE, frozenset({0}), "q0"),
        DtaEdge("q0", sym("a"), guard(atom(0, ">", 1), atom(0, "<", 2)), frozenset({0}), "q1"),
        DtaEdge("q1", sym("c"), TRUE, frozenset({0}), "q0"),
    )
    return Dta(
        clocks=("x",),
        locations=("q0", "q1", "q2"),
        initial="q0",
        edges=edges,
        acceptance=MullerAcceptance((frozenset({"q0", "q2"}),)),
    )


def random_dta(rng: np.random.Generator, n_clocks: int = 1, finite: bool = True) -> Dta:
    """Random DTA that is deterministic by construction.

    Edges from one (location, symbol) pair carry pairwise-disjoint guards on
    clock 0 (intervals between sorted integer breakpoints); extra atoms on
    other clocks cannot break disjointness.
    """
    n_locs = int(rng.integers(2, 5))
    locations = tuple(f"q{i}" for i in range(n_locs))
    symbols = [sym("a"), sym("b")]
    edges = []
    for q in locations[:-1] if finite else locations:
        for symbol in symbols:
            if rng.random() < 0.25:
                continue
            c1, c2 = sorted(rng.choice(np.arange(1, 5), size=2, replace=False))
            pieces = [
                guard(atom(0, "<", int(c1))),
                guard(atom(0, ">", int(c1)), atom(0, "<", int(c2))),
                guard(atom(0, ">=", int(c2))),
            ]
            for g in pieces:
                if rng.random() < 0.4:
                    continue
                if n_clocks > 1 and rng.random() < 0.5:
                    other = int(rng.integers(1, n_clocks))
                    g = ClockConstraint(
                        g.atoms + (atom(other, str(rng.choice(["<", ">"])), int(rng.integers(1, 4))),)
                    )
                resets = frozenset(
                    int(x) for x in range(n_clocks) if rng.random() < 0.3
                )
                target = str(rng.choice(locations))
                edges.append(DtaEdge(q, symbol, g, resets, target))
    if finite:
        acceptance = FiniteAcceptance(frozenset({locations[-1]}))
    else:
        acceptance = MullerAcceptance((frozenset({locations[0]}),))
    return Dta(
        clocks=tuple(f"x{i}" for i in range(n_clocks)),
        locations=locations,
        initial="q0",
        edges=tuple(edges),
        acceptance=acceptance,
    )


def two_family_muller_dta() -> Dta:
    """Five-location Muller DTA with family {{q1,q2},{q3,q4}}.

    From q0, an early b (x<1, reset) enters the q1/q2 cycle; a late b
    (1<x<2) enters the q3/q4 cycle.
    """
    edges = (
        DtaEdge("q0", sym("b"), guard(atom(0, "<", 1)), frozenset({0}), "q1"),
        DtaEdge("q0", sym("b"), guard(atom(0, ">", 1), atom(0, "<", 2)), frozenset(), "q3"),
        DtaEdge("q1", sym("c"), guard(atom(0, ">", 1)), frozenset(), "q2"),
        DtaEdge("q2", sym("a"), guard(atom(0, ">", 2)), frozenset({0}), "q1"),
        DtaEdge("q3", sym("c"), guard(atom(0, "<", 2)), frozenset({0}), "q4"),
        DtaEdge("q4", sym("a"), guard(atom(0, ">", 1)), frozenset(), "q3"),
    )
    return Dta(
        clocks=("x",),
        locations=("q0", "q1", "q2", "q3", "q4"),
        initial="q0",
        edges=edges,
        acceptance=MullerAcceptance(
            (frozenset({"q1", "q2"}), frozenset({"q3", "q4"}))
        ),
    )
