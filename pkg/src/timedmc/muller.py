"""Muller acceptance and qualitative checks on region graphs.

Under Muller acceptance a timed path is accepted when the set of
automaton locations it visits infinitely often is exactly a member of
the acceptance family.  On the region graph this reduces to reachability:
almost every path that enters a *bottom* strongly connected component
stays there and visits all of its vertices infinitely often, so the
acceptance probability equals the probability of reaching the union of
the accepting BSCCs.  Quantitatively that union is handed to one of the
reachability engines (interval partitioning for one clock, grid value
iteration otherwise); qualitatively the graph alone decides whether the
probability is positive or one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .grid import ConvergenceError, GridSpec, grid_reach_probability
from .markov import Ctmc, bottom_sccs
from .product import build_product
from .regions import RegionGraph, build_region_graph, prune_region_graph, \
    simplify_region_graph
from .report import PhaseTimer, VerificationReport
from .single_clock import assemble_and_solve, compute_transients, \
    partition_region_graph
from .timed import Dta, MullerAcceptance, validate_dta

__all__ = [
    "AcceptingBsccSet",
    "QualitativeResult",
    "accepting_bsccs",
    "check_muller",
    "qualitative_check",
]


@dataclass(frozen=True)
class AcceptingBsccSet:
    """The accepting bottom strongly connected components of a region graph.

    Parameters
    ----------
    bsccs : tuple of frozenset of int
        Accepting BSCCs as pairwise disjoint vertex sets, ordered by their
        smallest vertex.
    union : frozenset of int
        Union of all accepting BSCCs; the target set for reachability.
    witnesses : tuple of frozenset of int
        Per BSCC, the acceptance-family member (a set of product location
        indices) that certifies it.
    mode : str
        ``"exact"`` or ``"containment"`` (see :func:`accepting_bsccs`).
    """

    bsccs: tuple[frozenset[int], ...]
    union: frozenset[int]
    witnesses: tuple[frozenset[int], ...]
    mode: str


def accepting_bsccs(
    g: RegionGraph,
    family: tuple[frozenset[int], ...] | None = None,
    mode: str = "exact",
) -> AcceptingBsccSet:
    """Find the accepting BSCCs of a region graph under a Muller family.

    A bottom SCC is accepting when the set of product locations of its
    vertices matches a member of the family.  Inside a BSCC every vertex
    recurs almost surely, so the locations seen infinitely often are
    exactly the BSCC's locations: ``"exact"`` demands set equality with a
    family member (the Muller condition read literally), ``"containment"``
    only demands inclusion in a member.  Exact is the default; the two
    modes coincide unless a member strictly contains some BSCC's locations.

    Parameters
    ----------
    g : RegionGraph
        Simplified, unpruned region graph of the product.
    family : tuple of frozenset of int, optional
        Acceptance family over product location indices; defaults to the
        family carried by the graph's product, which must be Muller.
    mode : str
        ``"exact"`` (default) or ``"containment"``.

    Returns
    -------
    AcceptingBsccSet

    Raises
    ------
    ValueError
        If no family is given and the product is not Muller, or the mode
        is unknown.
    """
    if mode not in ("exact", "containment"):
        raise ValueError(f"unknown mode {mode!r}: use 'exact' or 'containment'")
    if family is None:
        acceptance = g.dmta.acceptance
        if not isinstance(acceptance, MullerAcceptance):
            raise ValueError(
                "accepting_bsccs needs a Muller acceptance family"
            )
        family = acceptance.family
    adjacency = g.adjacency()
    accepted: list[frozenset[int]] = []
    witnesses: list[frozenset[int]] = []
    for component in bottom_sccs(adjacency):
        locations = frozenset(g.location(v) for v in component)
        witness = next(
            (
                member
                for member in family
                if (locations == member if mode == "exact"
                    else locations <= member)
            ),
            None,
        )
        if witness is None:
            continue
        for v in component:
            if any(w not in component for w in adjacency[v]):
                raise RuntimeError(
                    "internal error: accepting BSCC has an outgoing edge"
                )
        accepted.append(component)
        witnesses.append(witness)
    order = sorted(range(len(accepted)), key=lambda i: min(accepted[i]))
    bsccs = tuple(accepted[i] for i in order)
    union: frozenset[int] = frozenset().union(*bsccs) if bsccs else frozenset()
    if sum(len(b) for b in bsccs) != len(union):
        raise RuntimeError("internal error: accepting BSCCs overlap")
    return AcceptingBsccSet(
        bsccs=bsccs,
        union=union,
        witnesses=tuple(witnesses[i] for i in order),
        mode=mode,
    )


def check_muller(
    c: Ctmc,
    a: Dta,
    engine: str | None = None,
    eps: float = 1e-12,
    spec: GridSpec = GridSpec(),
) -> VerificationReport:
    """Probability that the CTMC satisfies a Muller DTA specification.

    The accepting BSCCs of the (unpruned) simplified region graph are
    computed under the exact reading, then their union is reached with the
    requested quantitative engine.  Both BSCC readings are evaluated; a
    warning is attached when they disagree.

    Parameters
    ----------
    c : Ctmc
        The chain under verification.
    a : Dta
        Deterministic timed automaton with Muller acceptance.
    engine : str, optional
        ``"single_clock"`` or ``"grid"``; defaults to ``"single_clock"``
        for one clock and ``"grid"`` otherwise.
    eps : float
        Truncation budget of the single-clock engine.
    spec : GridSpec
        Discretization parameters of the grid engine.

    Returns
    -------
    VerificationReport
        ``method`` names the engine used, ``acceptance`` is ``"muller"``.

    Raises
    ------
    ValueError
        If the acceptance is not Muller, the engine name is unknown, or
        ``"single_clock"`` is requested for a multi-clock automaton.
    ConvergenceError
        If the grid engine exhausts its sweep budget.
    """
    timer = PhaseTimer()
    with timer.phase("validate"):
        validated = validate_dta(a)
        if not isinstance(validated.dta.acceptance, MullerAcceptance):
            raise ValueError(
                "check_muller requires a Muller acceptance condition"
            )
        n_clocks = len(validated.dta.clocks)
        if engine is None:
            engine = "single_clock" if n_clocks == 1 else "grid"
        if engine not in ("single_clock", "grid"):
            raise ValueError(
                f"unknown engine {engine!r}: use 'single_clock' or 'grid'"
            )
        if engine == "single_clock" and n_clocks != 1:
            raise ValueError(
                f"single-clock engine got {n_clocks} clocks; "
                "use the grid engine for multi-clock specifications"
            )
    warnings = list(validated.warnings)
    with timer.phase("product"):
        product = build_product(c, validated.dta)
    with timer.phase("region_graph"):
        graph = simplify_region_graph(build_region_graph(product))
    with timer.phase("bsccs"):
        exact = accepting_bsccs(graph, mode="exact")
        contained = accepting_bsccs(graph, mode="containment")
    if exact.union != contained.union:
        warnings.append(
            "exact and containment readings of the Muller condition "
            "disagree on the accepting BSCCs; using the exact reading"
        )
    targets = exact.union
    statistics: dict[str, float] = {
        "locations": product.n_locations,
        "vertices": graph.n_vertices,
        "accepting_bsccs": len(exact.bsccs),
        "target_vertices": len(targets),
        "modes_agree": float(exact.union == contained.union),
    }
    error_bound: float | None = eps if engine == "single_clock" else None
    if not targets:
        probability = 0.0
    elif graph.initial in targets:
        probability = 1.0
    elif engine == "single_clock":
        with timer.phase("prune"):
            pruned = prune_region_graph(graph, targets=targets)
            pairs = {graph.vertices[v] for v in targets}
            mapped = frozenset(
                v for v, pair in enumerate(pruned.vertices) if pair in pairs
            )
        with timer.phase("partition"):
            partition = partition_region_graph(pruned, targets=mapped)
        statistics["subgraphs"] = len(partition.subgraphs)
        with timer.phase("transients"):
            transients = compute_transients(partition, eps=eps)
        with timer.phase("solve"):
            _, probability = assemble_and_solve(partition, transients)
    else:
        with timer.phase("iterate"):
            field_, iterations, residual = grid_reach_probability(
                product, graph, targets, spec
            )
        probability = field_.at(product.initial, (0.0,) * product.n_clocks)
        statistics["iterations"] = iterations
        statistics["residual"] = residual
        statistics["step"] = field_.step
        if residual >= spec.eps_fix and iterations > 0:
            raise ConvergenceError(
                f"value iteration did not converge within {iterations} "
                f"sweeps (residual {residual:.3g} >= eps_fix "
                f"{spec.eps_fix:.3g})",
                residual=residual,
                iterations=iterations,
                probability=probability,
            )
    return VerificationReport(
        probability=probability,
        method=engine,
        acceptance="muller",
        error_bound=error_bound,
        statistics=statistics,
        timings_ms=timer.timings_ms,
        warnings=warnings,
    )


@dataclass(frozen=True)
class QualitativeResult:
    """Outcome of a graph-based qualitative check.

    Parameters
    ----------
    mode : str
        ``"positive"`` or ``"almost_sure"``.
    holds : bool
        Whether the property holds.
    witness : tuple of str, or str, or None
        For a positive verdict, the vertex labels of a path from the
        initial vertex into the accepting set.  For a refuted almost-sure
        check, the label of a reachable vertex from which acceptance is
        not certain.  ``None`` otherwise.
    """

    mode: str
    holds: bool
    witness: tuple[str, ...] | str | None


def _traversable(g: RegionGraph) -> dict[int, list[int]]:
    """Successors reachable with positive probability before acceptance.

    Delay edges always carry positive mass (the sojourn outlasts a bounded
    region with probability ``exp(-E*delta) > 0``).  Markovian edges fire
    only where the vertex rate is positive: a zero vertex rate means either
    a zero exit rate (the location never jumps; only time passes) or no
    enabled edge at all.
    """
    adj: dict[int, list[int]] = {v: [] for v in range(g.n_vertices)}
    for edge in g.markov_edges:
        if g.rates[edge.source] > 0.0 and edge.target not in adj[edge.source]:
            adj[edge.source].append(edge.target)
    for source, target in g.delay_edges.items():
        if target not in adj[source]:
            adj[source].append(target)
    return adj


def qualitative_check(c: Ctmc, a: Dta, mode: str) -> QualitativeResult:
    """Graph-only check whether acceptance has positive probability, or one.

    The accepting vertex set is the set of accepting-location vertices
    under finite acceptance and the union of accepting BSCCs under Muller
    acceptance.  ``"positive"`` holds iff that set is reachable through
    positive-probability edges.  ``"almost_sure"`` holds iff, in addition,
    no reachable vertex can lose mass first: every reachable vertex can
    still reach the accepting set, and none leaks (a leak is a vertex whose
    location jumps at a positive rate while no edge is enabled, so the jump
    falsifies the specification).

    Parameters
    ----------
    c : Ctmc
        The chain under verification.
    a : Dta
        Specification automaton (either acceptance kind).
    mode : str
        ``"positive"`` or ``"almost_sure"``.

    Returns
    -------
    QualitativeResult
    """
    if mode not in ("positive", "almost_sure"):
        raise ValueError(
            f"unknown mode {mode!r}: use 'positive' or 'almost_sure'"
        )
    validated = validate_dta(a)
    product = build_product(c, validated.dta)
    graph = simplify_region_graph(build_region_graph(product))
    if isinstance(validated.dta.acceptance, MullerAcceptance):
        accepting = accepting_bsccs(graph, mode="exact").union
    else:
        accepting = graph.accepting
    adjacency = _traversable(graph)
    parents: dict[int, int | None] = {graph.initial: None}
    order: list[int] = [graph.initial]
    queue: deque[int] = deque([graph.initial])
    while queue:
        v = queue.popleft()
        if v in accepting:
            continue
        for w in adjacency[v]:
            if w not in parents:
                parents[w] = v
                order.append(w)
                queue.append(w)
    if mode == "positive":
        hit = next((v for v in order if v in accepting), None)
        if hit is None:
            return QualitativeResult(mode=mode, holds=False, witness=None)
        path: list[str] = []
        cursor: int | None = hit
        while cursor is not None:
            path.append(graph.vertex_label(cursor))
            cursor = parents[cursor]
        return QualitativeResult(
            mode=mode, holds=True, witness=tuple(reversed(path))
        )
    reverse: dict[int, list[int]] = {v: [] for v in range(graph.n_vertices)}
    for v, succs in adjacency.items():
        for w in succs:
            reverse[w].append(v)
    can_reach = set(accepting)
    queue = deque(can_reach)
    while queue:
        v = queue.popleft()
        for w in reverse[v]:
            if w not in can_reach:
                can_reach.add(w)
                queue.append(w)
    exit_rates = graph.dmta.exit_rates
    for v in order:
        if v in accepting:
            continue
        leaks = (
            graph.rates[v] == 0.0
            and float(exit_rates[graph.location(v)]) > 0.0
        )
        if leaks or v not in can_reach:
            return QualitativeResult(
                mode=mode, holds=False, witness=graph.vertex_label(v)
            )
    return QualitativeResult(mode=mode, holds=True, witness=None)
