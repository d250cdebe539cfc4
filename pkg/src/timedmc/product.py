"""Product of a CTMC and a DTA: deterministic Markov timed automata.

A product location pairs a CTMC state with a DTA location.  Edges inherit
the DTA guard and resets; the target distribution is the CTMC jump row, and
the exit rate of a location is the exit rate of its CTMC state.  Only the
part reachable from the initial pair is constructed.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .markov import Ctmc
from .timed import (
    ClockConstraint,
    Dta,
    FiniteAcceptance,
    Interval,
    MullerAcceptance,
    _guards_overlap,
    guard_enabled_interval,
)

DIST_TOL = 1e-9


@dataclass(frozen=True)
class DmtaEdge:
    """A guarded product edge with a distribution over target locations.

    ``symbol`` is provenance only (the CTMC label that induced the edge); it
    is not needed for the semantics and appears only in messages.
    """

    source: int
    guard: ClockConstraint
    resets: frozenset[int]
    targets: tuple[tuple[int, float], ...]
    symbol: frozenset[str]


@dataclass(frozen=True, eq=False)
class Dmta:
    """A deterministic Markov timed automaton.

    Locations are indexed 0..n-1; ``pairs[i]`` gives the (CTMC state, DTA
    location) behind index i.  Acceptance reuses the DTA wrapper types with
    product-location indices as members.
    """

    pairs: tuple[tuple[int, str], ...]
    clocks: tuple[str, ...]
    exit_rates: np.ndarray
    edges: tuple[DmtaEdge, ...]
    acceptance: FiniteAcceptance | MullerAcceptance
    state_names: tuple[str, ...]
    initial: int = 0

    def __post_init__(self) -> None:
        n = len(self.pairs)
        rates = np.asarray(self.exit_rates, dtype=float)
        if rates.shape != (n,):
            raise ValueError("exit_rates must have one entry per location")
        if np.any(rates < 0):
            raise ValueError("exit rates must be nonnegative")
        rates = rates.copy()
        rates.setflags(write=False)
        object.__setattr__(self, "exit_rates", rates)
        if not (0 <= self.initial < n):
            raise ValueError("initial location out of range")
        for e in self.edges:
            if not (0 <= e.source < n):
                raise ValueError("edge source out of range")
            total = 0.0
            for target, p in e.targets:
                if not (0 <= target < n):
                    raise ValueError("edge target out of range")
                if p <= 0:
                    raise ValueError("target probabilities must be positive")
                total += p
            if abs(total - 1.0) > DIST_TOL:
                raise ValueError(
                    f"edge distribution from location {e.source} sums to {total!r}"
                )
        by_source: dict[int, list[DmtaEdge]] = {}
        for e in self.edges:
            by_source.setdefault(e.source, []).append(e)
        n_clocks = len(self.clocks)
        for source, group in by_source.items():
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    overlap, interior = _guards_overlap(
                        group[i].guard, group[j].guard, n_clocks
                    )
                    if overlap and interior:
                        raise ValueError(
                            f"product determinism violated at location {source} "
                            f"({self.location_name(source)})"
                        )

    @property
    def n_locations(self) -> int:
        return len(self.pairs)

    @property
    def n_clocks(self) -> int:
        return len(self.clocks)

    def location_name(self, i: int) -> str:
        s, q = self.pairs[i]
        return f"<{self.state_names[s]},{q}>"

    @cached_property
    def edges_from(self) -> dict[int, tuple[DmtaEdge, ...]]:
        out: dict[int, list[DmtaEdge]] = {i: [] for i in range(self.n_locations)}
        for e in self.edges:
            out[e.source].append(e)
        return {k: tuple(v) for k, v in out.items()}


def build_product(c: Ctmc, a: Dta) -> Dmta:
    """Build the reachable product of a CTMC and a validated DTA.

    A location <s,q> has one edge per DTA edge (L(s), g, X, q') out of q,
    with target distribution {<s',q'>: P(s,s')} over the CTMC successors.
    """
    index: dict[tuple[int, str], int] = {}
    pairs: list[tuple[int, str]] = []

    def intern(pair: tuple[int, str]) -> int:
        if pair not in index:
            index[pair] = len(pairs)
            pairs.append(pair)
        return index[pair]

    P = c.jump_matrix
    edges: list[DmtaEdge] = []
    queue: deque[int] = deque([intern((c.initial, a.initial))])
    seen = {0}
    while queue:
        loc = queue.popleft()
        s, q = pairs[loc]
        symbol = c.labels[s]
        successors = [(int(t), float(P[s, t])) for t in np.flatnonzero(P[s] > 0)]
        for dta_edge in a.edges_by_source_symbol.get((q, symbol), ()):
            targets = tuple(
                (intern((t, dta_edge.target)), p) for t, p in successors
            )
            edges.append(
                DmtaEdge(
                    source=loc,
                    guard=dta_edge.guard,
                    resets=dta_edge.resets,
                    targets=targets,
                    symbol=symbol,
                )
            )
            for t, _ in targets:
                if t not in seen:
                    seen.add(t)
                    queue.append(t)

    if isinstance(a.acceptance, FiniteAcceptance):
        accepting = frozenset(
            i for i, (_, q) in enumerate(pairs) if q in a.acceptance.locations
        )
        acceptance: FiniteAcceptance | MullerAcceptance = FiniteAcceptance(accepting)
    else:
        acceptance = MullerAcceptance(
            tuple(
                frozenset(i for i, (_, q) in enumerate(pairs) if q in member)
                for member in a.acceptance.family
            )
        )
    return Dmta(
        pairs=tuple(pairs),
        clocks=a.clocks,
        exit_rates=np.array([c.exit_rates[s] for s, _ in pairs]),
        edges=tuple(edges),
        acceptance=acceptance,
        state_names=c.names,
    )


def _clip(window: Interval | None, interval) -> tuple[float, float] | None:
    """Intersect a guard window with an integration interval; None if empty."""
    if window is None:
        return None
    if isinstance(interval, Interval):
        lo, hi = interval.lo, interval.hi
    else:
        lo, hi = interval
    a = max(window.lo, lo, 0.0)
    b = min(window.hi, hi)
    if b <= a:
        return None
    return a, b


def one_jump_probability(m: Dmta, ell: int, ell_prime: int, eta: np.ndarray, interval) -> float:
    """Probability of jumping from ell to ell_prime with delay in the interval.

    Closed form of the exponential-sojourn integral restricted to the part
    of the interval where the edge guard is enabled.  Returns 0 when no edge
    connects the two locations or the clipped window is empty.
    """
    rate = float(m.exit_rates[ell])
    if rate == 0.0:
        return 0.0
    total = 0.0
    for edge in m.edges_from[ell]:
        p = next((p for t, p in edge.targets if t == ell_prime), 0.0)
        if p == 0.0:
            continue
        clipped = _clip(guard_enabled_interval(edge.guard, eta), interval)
        if clipped is None:
            continue
        a, b = clipped
        hi = 0.0 if math.isinf(b) else math.exp(-rate * b)
        total += p * (math.exp(-rate * a) - hi)
    return total


def _trapezoid_refine(f, a: float, b: float, tol: float) -> float:
    """Adaptive trapezoid integration with interval bisection."""
    fa, fb = f(a), f(b)

    def recurse(x0: float, x1: float, f0: float, f1: float, coarse: float, tol: float, depth: int) -> float:
        mid = 0.5 * (x0 + x1)
        fm = f(mid)
        left = 0.25 * (x1 - x0) * (f0 + fm)
        right = 0.25 * (x1 - x0) * (fm + f1)
        fine = left + right
        if depth >= 40 or abs(fine - coarse) <= 3.0 * tol:
            return fine + (fine - coarse) / 3.0
        half = 0.5 * tol
        return recurse(x0, mid, f0, fm, left, half, depth + 1) + recurse(
            mid, x1, fm, f1, right, half, depth + 1
        )

    return recurse(a, b, fa, fb, 0.5 * (b - a) * (fa + fb), tol, 0)


def _resets_cover_downstream(m: Dmta, path_edges, i: int) -> bool:
    """Whether step i's resets erase every clock read by later guards."""
    downstream = {
        atom.clock
        for edge in path_edges[i + 1 :]
        for atom in edge.guard.atoms
    }
    return downstream <= path_edges[i].resets


def cylinder_probability(
    m: Dmta,
    locations,
    intervals,
    eta0: np.ndarray,
    quad_tol: float = 1e-8,
    max_depth: int = 4,
) -> float:
    """Probability that the product takes the given location sequence with
    jump delays inside the given intervals, starting from valuation eta0.

    When each step's interval lies inside the guard window and its resets
    erase every clock read downstream, the value factorizes into a product
    of one-jump probabilities.  Otherwise the nested integrals are computed
    by adaptive trapezoid quadrature; nesting deeper than ``max_depth`` is
    rejected.
    """
    locations = list(locations)
    intervals = list(intervals)
    if len(locations) != len(intervals) + 1:
        raise ValueError("need exactly one more location than intervals")
    n = len(intervals)
    if n == 0:
        return 1.0

    # Select the unique edge chain; a missing edge makes the cylinder null.
    path_edges = []
    for i in range(n):
        candidates = [
            e
            for e in m.edges_from[locations[i]]
            if any(t == locations[i + 1] for t, _ in e.targets)
        ]
        if not candidates:
            return 0.0
        if len(candidates) > 1:
            # Disjoint guards: fall back to quadrature over their union by
            # treating each alternative separately at this step.
            break
        path_edges.append(candidates[0])

    # The value factorizes iff the continuation at every step is constant
    # over the step's delay support, which holds when each step's resets
    # erase all clocks read by later guards.
    separable = len(path_edges) == n and all(
        _resets_cover_downstream(m, path_edges, i) for i in range(n - 1)
    )
    if separable:
        value = 1.0
        eta = np.asarray(eta0, dtype=float)
        for i, edge in enumerate(path_edges):
            value *= one_jump_probability(m, locations[i], locations[i + 1], eta, intervals[i])
            if value == 0.0:
                return 0.0
            # Advance by any representative delay: only reset clocks are
            # read downstream and those become 0 regardless.
            iv = intervals[i]
            lo, hi = (iv.lo, iv.hi) if isinstance(iv, Interval) else iv
            rep = 0.5 * (max(lo, 0.0) + min(hi, max(lo, 0.0) + 1.0))
            eta = eta + rep
            eta[list(edge.resets)] = 0.0
        return value

    if n > max_depth:
        raise ValueError(
            f"cylinder nesting depth {n} exceeds the quadrature limit {max_depth}"
        )

    tail_tol = quad_tol / (10.0 * n)

    def value(i: int, eta: np.ndarray) -> float:
        if i == n:
            return 1.0
        rate = float(m.exit_rates[locations[i]])
        if rate == 0.0:
            return 0.0
        total = 0.0
        for edge in m.edges_from[locations[i]]:
            p = next((p for t, p in edge.targets if t == locations[i + 1]), 0.0)
            if p == 0.0:
                continue
            clipped = _clip(guard_enabled_interval(edge.guard, eta), intervals[i])
            if clipped is None:
                continue
            a, b = clipped
            if math.isinf(b):
                b = a + max(1.0, -math.log(tail_tol) / rate)

            def integrand(tau: float, edge=edge, p=p) -> float:
                eta_t = eta + tau
                if edge.resets:
                    eta_t = eta_t.copy()
                    eta_t[list(edge.resets)] = 0.0
                return rate * math.exp(-rate * tau) * p * value(i + 1, eta_t)

            total += _trapezoid_refine(integrand, a, b, quad_tol / n)
        return total

    return value(0, np.asarray(eta0, dtype=float))
