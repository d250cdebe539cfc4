"""Exact verification for single-clock specifications with finite acceptance.

The pruned region graph of a single-clock product decomposes by clock
interval into subgraphs G_0..G_m: Markovian edges without reset stay inside
a subgraph, delay edges step to the next one, and resetting edges return to
G_0.  Between two consecutive constants the process behaves like a finite
CTMC, so the probability to traverse an interval is a transient matrix of
an augmented chain in which resets are absorbing; stitching the intervals
together yields one linear system for the acceptance probabilities at the
interval entry points, solved exactly up to uniformization truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .markov import Ctmc, transient_matrix
from .product import Dmta, build_product
from .regions import (
    MarkovEdge,
    RegionGraph,
    build_region_graph,
    prune_region_graph,
    simplify_region_graph,
)
from .report import PhaseTimer, VerificationReport
from .timed import Dta, FiniteAcceptance, validate_dta

__all__ = [
    "Partition",
    "Subgraph",
    "assemble_and_solve",
    "augmented_ctmc",
    "compute_transients",
    "partition_region_graph",
    "solve_single_clock",
]

VALUE_TOL = 1e-9
"""Solution entries may exceed [0, 1] by at most this before it is an error."""


@dataclass(frozen=True)
class Subgraph:
    """The slice of a region graph over one clock interval.

    Vertex ids are global region-graph indices; ``delay`` maps a vertex to
    its delay successor in the next subgraph.
    """

    index: int
    vertices: tuple[int, ...]
    accepting: frozenset[int]
    width: float
    markov: tuple[MarkovEdge, ...]
    reset: tuple[MarkovEdge, ...]
    delay: dict[int, int]

    @property
    def size(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class Partition:
    """A region graph partitioned into interval subgraphs G_0..G_m."""

    graph: RegionGraph
    constants: tuple[int, ...]
    subgraphs: tuple[Subgraph, ...]

    @property
    def m(self) -> int:
        return len(self.subgraphs) - 1


def partition_region_graph(
    g: RegionGraph, targets: frozenset[int] | None = None
) -> Partition:
    """Slice a simplified single-clock region graph by clock interval.

    Every edge of the graph lands in exactly one class: Markovian edges
    without reset stay within their interval, Markovian edges with a reset
    target interval 0, and delay edges target the next interval.

    Parameters
    ----------
    g : RegionGraph
        Simplified (boundary-free) single-clock region graph.
    targets : frozenset of int, optional
        Vertices to treat as accepting-absorbing.  Defaults to the graph's
        own accepting set, which requires finite acceptance; an explicit set
        permits reachability queries (e.g. toward accepting BSCC unions) on
        graphs without one.

    Raises
    ------
    ValueError
        If the graph has more than one clock, is not simplified, or no
        target set is available.
    """
    if len(g.thresholds) != 1:
        raise ValueError("interval partitioning requires a single clock")
    if targets is None:
        if not isinstance(g.dmta.acceptance, FiniteAcceptance):
            raise ValueError("interval partitioning requires finite acceptance")
        targets = g.accepting
    if g.boundary_vertices:
        raise ValueError("graph must be simplified before partitioning")
    constants = g.thresholds[0]
    m = len(constants) - 1

    def interval(v: int) -> int:
        return g.region(v).ints[0]

    members: list[list[int]] = [[] for _ in range(m + 1)]
    for v in range(g.n_vertices):
        members[interval(v)].append(v)
    markov: list[list[MarkovEdge]] = [[] for _ in range(m + 1)]
    reset: list[list[MarkovEdge]] = [[] for _ in range(m + 1)]
    for e in g.markov_edges:
        i = interval(e.source)
        if e.resets:
            if interval(e.target) != 0:
                raise ValueError("resetting edge does not target interval 0")
            reset[i].append(e)
        else:
            if interval(e.target) != i:
                raise ValueError("non-resetting edge leaves its interval")
            markov[i].append(e)
    delay: list[dict[int, int]] = [{} for _ in range(m + 1)]
    for source, target in g.delay_edges.items():
        i = interval(source)
        if interval(target) != i + 1:
            raise ValueError("delay edge does not step to the next interval")
        delay[i][source] = target
    if delay[m]:
        raise ValueError("last interval cannot have delay edges")
    subgraphs = tuple(
        Subgraph(
            index=i,
            vertices=tuple(members[i]),
            accepting=frozenset(v for v in members[i] if v in targets),
            width=float(constants[i + 1] - constants[i]) if i < m else math.inf,
            markov=tuple(markov[i]),
            reset=tuple(reset[i]),
            delay=delay[i],
        )
        for i in range(m + 1)
    )
    return Partition(graph=g, constants=tuple(constants), subgraphs=subgraphs)


def augmented_ctmc(p: Partition, i: int) -> Ctmc:
    """The augmented chain of subgraph i: V_i plus absorbing V_0 copies.

    States 0..k_i-1 mirror V_i in order; the next k_0 states are absorbing
    copies of V_0 reached by resetting edges; the final state absorbs the
    probability mass of CTMC jumps with no enabled (unpruned) region-graph
    edge, which reject the run.  Accepting vertices are absorbing: a run is
    accepted the moment it enters one.  Vertices keep their location's exit
    rate — the underlying chain keeps jumping even where no guard is
    enabled, and such jumps reject.
    """
    if not 0 <= i < p.m:
        raise ValueError(f"augmented chain only defined for i < m, got {i}")
    g = p.graph
    sub = p.subgraphs[i]
    zero = p.subgraphs[0]
    k_i, k_0 = sub.size, zero.size
    n = k_i + k_0 + 1
    local = {v: j for j, v in enumerate(sub.vertices)}
    copy = {v: k_i + j for j, v in enumerate(zero.vertices)}
    jump = np.zeros((n, n))
    rates = np.zeros(n)
    for j, v in enumerate(sub.vertices):
        exit_rate = float(g.dmta.exit_rates[g.location(v)])
        if v in sub.accepting or exit_rate == 0.0:
            jump[j, j] = 1.0
            continue
        rates[j] = exit_rate
        total = 0.0
        for e in g.markov_from[v]:
            target = copy[e.target] if e.resets else local[e.target]
            jump[j, target] += e.probability
            total += e.probability
        jump[j, n - 1] = max(0.0, 1.0 - total)
    for j in range(k_i, n):
        jump[j, j] = 1.0
    names = tuple(f"v{v}" for v in sub.vertices)
    names += tuple(f"v{v}@0" for v in zero.vertices)
    names += ("REJ",)
    labels = tuple(frozenset() for _ in range(n))
    return Ctmc(
        labels=labels, jump_matrix=jump, exit_rates=rates, initial=0, names=names
    )


def compute_transients(
    p: Partition, eps: float = 1e-12
) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Per subgraph i < m, the pair (Π_i(Δc_i), Π̄_i^a(Δc_i)).

    Π_i[j, l] is the probability to sit at the l-th V_i vertex after the
    interval width has elapsed from the j-th, without a reset; Π̄_i^a[j, u]
    the probability to have been absorbed by a reset into the u-th V_0
    vertex.  The uniformization budget ``eps`` is split evenly over the
    m+1 subgraphs.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    per_chain = eps / (p.m + 1)
    k_0 = p.subgraphs[0].size
    out: list[tuple[np.ndarray, np.ndarray]] = []
    for i in range(p.m):
        k_i = p.subgraphs[i].size
        if k_i == 0:
            out.append((np.zeros((0, 0)), np.zeros((0, k_0))))
            continue
        chain = augmented_ctmc(p, i)
        full = transient_matrix(chain, p.subgraphs[i].width, eps=per_chain)
        out.append((full[:k_i, :k_i], full[:k_i, k_i : k_i + k_0]))
    return tuple(out)


def assemble_and_solve(
    p: Partition, transients: tuple[tuple[np.ndarray, np.ndarray], ...]
) -> tuple[np.ndarray, float]:
    """Solve the stacked linear system for all interval entry values.

    For i < m the unknowns satisfy
    ``U_i = Π_i · F_i · U_{i+1} + Π̄_i^a · U_0`` where the delay step F_i
    follows delay edges (accepting vertices contribute the constant 1, and
    absorbed-at-boundary mass with no delay successor rejects); for i = m,
    ``U_m = P̂_m · U_m + 1_F + B̂_m · U_0`` with accepting rows pinned to 1
    and zero-exit-rate rows pinned to 0.

    Returns
    -------
    (u, probability)
        ``u[v]`` is the acceptance probability when entering vertex ``v``
        at the left end of its interval; ``probability`` is ``u`` at the
        initial vertex.

    Raises
    ------
    RuntimeError
        If the system is singular or a solution entry leaves [0, 1] by
        more than ``VALUE_TOL`` (both indicate an internal error).
    """
    g = p.graph
    n = g.n_vertices
    system = np.eye(n)
    rhs = np.zeros(n)
    for sub in p.subgraphs:
        if sub.index < p.m:
            pi, pi_bar = transients[sub.index]
            for row, v in enumerate(sub.vertices):
                if v in sub.accepting:
                    rhs[v] = 1.0
                    continue
                for col, w in enumerate(sub.vertices):
                    weight = pi[row, col]
                    if weight == 0.0:
                        continue
                    if w in sub.accepting:
                        rhs[v] += weight
                    else:
                        successor = sub.delay.get(w)
                        if successor is not None:
                            system[v, successor] -= weight
                for col, u in enumerate(p.subgraphs[0].vertices):
                    weight = pi_bar[row, col]
                    if weight != 0.0:
                        system[v, u] -= weight
        else:
            for v in sub.vertices:
                if v in sub.accepting:
                    rhs[v] = 1.0
                    continue
                if float(g.dmta.exit_rates[g.location(v)]) == 0.0:
                    continue  # never jumps: value 0
                for e in g.markov_from[v]:
                    system[v, e.target] -= e.probability
    try:
        u = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as err:
        raise RuntimeError(f"internal error: singular interval system ({err})")
    if u.min() < -VALUE_TOL or u.max() > 1.0 + VALUE_TOL:
        raise RuntimeError(
            f"internal error: solution outside [0, 1]: [{u.min()}, {u.max()}]"
        )
    u = np.clip(u, 0.0, 1.0)
    return u, float(u[g.initial])


def _single_clock_graph(m: Dmta) -> RegionGraph:
    return prune_region_graph(simplify_region_graph(build_region_graph(m)))


def solve_single_clock(c: Ctmc, a: Dta, eps: float = 1e-12) -> VerificationReport:
    """Exact acceptance probability of a single-clock, finite-acceptance DTA.

    Pipeline: validate, product, region graph (simplify + prune),
    interval partition, per-interval transients, one linear solve.

    Raises
    ------
    ValueError
        If the DTA has more than one clock or a Muller acceptance
        condition, or fails validation.
    """
    timer = PhaseTimer()
    with timer.phase("validate"):
        validated = validate_dta(a)
    if len(validated.dta.clocks) != 1:
        raise ValueError(
            f"single-clock solver got {len(validated.dta.clocks)} clocks; "
            "use the grid solver for multi-clock specifications"
        )
    if not isinstance(validated.dta.acceptance, FiniteAcceptance):
        raise ValueError("single-clock solver requires finite acceptance")
    with timer.phase("product"):
        product = build_product(c, validated.dta)
    with timer.phase("region_graph"):
        graph = _single_clock_graph(product)
    statistics: dict[str, float] = {
        "locations": product.n_locations,
        "vertices": graph.n_vertices,
        "markov_edges": len(graph.markov_edges),
        "delay_edges": len(graph.delay_edges),
    }
    if not graph.accepting:
        probability = 0.0
        statistics["subgraphs"] = 0
    elif graph.initial in graph.accepting:
        probability = 1.0
        statistics["subgraphs"] = 0
    else:
        with timer.phase("partition"):
            partition = partition_region_graph(graph)
        statistics["subgraphs"] = len(partition.subgraphs)
        with timer.phase("transients"):
            transients = compute_transients(partition, eps=eps)
        with timer.phase("solve"):
            _, probability = assemble_and_solve(partition, transients)
    return VerificationReport(
        probability=probability,
        method="single_clock",
        acceptance="finite",
        error_bound=eps,
        statistics=statistics,
        timings_ms=timer.timings_ms,
        warnings=validated.warnings,
    )
