"""Region graphs of deterministic Markov timed automata.

A region abstracts a set of clock valuations that satisfy the same guards
and cross the same integer thresholds in the same order under time flow.
The region graph of a DMTA pairs its locations with regions and connects
them by Markovian edges (a guarded jump fires inside the region) and delay
edges (time flow leaves the region).  The graph is built in its classic
form first, where resets and threshold crossings land on measure-zero
boundary regions; :func:`simplify_region_graph` then contracts every
boundary vertex into its delay successor, and :func:`prune_region_graph`
restricts the result to the part that matters for acceptance.

The pruned, simplified graph is the state space of a piecewise
deterministic process: between jumps all clocks grow at rate one inside
one region, and :func:`boundary_hit_time` / :func:`embedded_jump_probability`
expose the two primitive quantities of that process.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .product import Dmta, DmtaEdge
from .timed import ClockConstraint, FiniteAcceptance

__all__ = [
    "MarkovEdge",
    "PdpState",
    "Region",
    "RegionGraph",
    "boundary_hit_time",
    "build_region_graph",
    "embedded_jump_probability",
    "export_dot",
    "prune_region_graph",
    "region_of",
    "sample_valuation",
    "simplify_region_graph",
]


@dataclass(frozen=True)
class Region:
    """A clock region over per-clock integer threshold grids.

    Parameters
    ----------
    thresholds : tuple of tuple of int
        Per clock, the ascending grid of relevant constants, starting at 0.
        With a single clock this is the sorted set of guard constants; with
        several clocks every grid is the unit grid 0..c, because ordering
        fractional parts across clocks is only meaningful when all segments
        have equal length.
    ints : tuple of int
        Per clock, the index ``k`` of its grid segment: the clock value lies
        in ``[T[k], T[k+1])``, where the segment above the last threshold is
        unbounded ("beyond", no longer distinguished by any guard).
    zero_marked : frozenset of int
        Clocks whose value is exactly ``T[k]``.  Nonempty iff the region is
        a measure-zero boundary region.
    frac_order : tuple of frozenset of int
        Ordered partition of the remaining non-beyond clocks by strictly
        ascending fractional position inside their segment; clocks in one
        class have equal fractional parts.

    Notes
    -----
    A region with ``zero_marked`` empty is canonical for the merged reading
    in which each segment is half open from below, so it also covers the
    valuations of the boundary region it absorbs under
    :func:`simplify_region_graph`.
    """

    thresholds: tuple[tuple[int, ...], ...]
    ints: tuple[int, ...]
    zero_marked: frozenset[int]
    frac_order: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        n = len(self.thresholds)
        if len(self.ints) != n:
            raise ValueError("ints and thresholds must have equal length")
        fractional = set()
        for cls in self.frac_order:
            if not cls:
                raise ValueError("empty fractional class")
            fractional |= cls
        expected = {
            x
            for x in range(n)
            if x not in self.zero_marked and self.ints[x] < self.max_index(x)
        }
        if fractional != expected or any(x in self.zero_marked for x in fractional):
            raise ValueError("fractional classes must cover exactly the "
                             "interior non-beyond clocks")
        for x, k in enumerate(self.ints):
            if not 0 <= k <= self.max_index(x):
                raise ValueError(f"segment index {k} out of range for clock {x}")

    @property
    def n_clocks(self) -> int:
        return len(self.ints)

    def max_index(self, clock: int) -> int:
        return len(self.thresholds[clock]) - 1

    def is_beyond(self, clock: int) -> bool:
        """Whether the clock exceeds its last threshold (strictly)."""
        return self.ints[clock] == self.max_index(clock) and clock not in self.zero_marked

    @property
    def is_boundary(self) -> bool:
        return bool(self.zero_marked)

    def delay_successor(self) -> "Region | None":
        """The region entered when time flows out of this one.

        A boundary region opens up immediately: zero-marked clocks below
        their last threshold start a new smallest positive fractional
        class, the others become beyond.  An open region is left when its
        largest fractional class reaches the next threshold; if every clock
        is beyond there is no successor.
        """
        if self.zero_marked:
            entering = frozenset(
                x for x in self.zero_marked if self.ints[x] < self.max_index(x)
            )
            order = (entering, *self.frac_order) if entering else self.frac_order
            return replace(self, zero_marked=frozenset(), frac_order=order)
        if not self.frac_order:
            return None
        crossing = self.frac_order[-1]
        ints = tuple(
            k + 1 if x in crossing else k for x, k in enumerate(self.ints)
        )
        return replace(
            self, ints=ints, zero_marked=crossing, frac_order=self.frac_order[:-1]
        )

    def reset(self, clocks: frozenset[int]) -> "Region":
        """The (boundary, unless ``clocks`` is empty) region after resets."""
        if not clocks:
            return self
        ints = tuple(0 if x in clocks else k for x, k in enumerate(self.ints))
        order = tuple(cls - clocks for cls in self.frac_order)
        return replace(
            self,
            ints=ints,
            zero_marked=self.zero_marked | clocks,
            frac_order=tuple(cls for cls in order if cls),
        )

    def representative(self) -> np.ndarray:
        """A valuation inside the region (exactly on thresholds if boundary).

        Every valuation of a region satisfies the same guards over the
        region's own constants, so the representative decides guard
        satisfaction for the whole region.
        """
        eta = np.zeros(self.n_clocks)
        n_classes = len(self.frac_order)
        position = {x: j for j, cls in enumerate(self.frac_order) for x in cls}
        for x, k in enumerate(self.ints):
            grid = self.thresholds[x]
            if self.is_beyond(x):
                eta[x] = grid[-1] + 0.5
            elif x in self.zero_marked:
                eta[x] = grid[k]
            else:
                span = grid[k + 1] - grid[k]
                eta[x] = grid[k] + span * (position[x] + 1) / (n_classes + 1)
        return eta

    def satisfies(self, guard: ClockConstraint) -> bool:
        return guard.satisfied(self.representative())

    def describe(self, clock_names: Sequence[str]) -> str:
        """Human-readable rendering, e.g. ``"0<=x1<1, x2>=2"``."""
        parts = []
        for x, name in enumerate(clock_names):
            grid = self.thresholds[x]
            k = self.ints[x]
            if self.is_beyond(x):
                parts.append(f"{name}>={grid[-1]}")
            elif x in self.zero_marked:
                parts.append(f"{name}={grid[k]}")
            else:
                parts.append(f"{grid[k]}<={name}<{grid[k + 1]}")
        text = ", ".join(parts)
        if len(self.frac_order) > 1:
            order = " < ".join(
                "{" + ",".join(sorted(clock_names[x] for x in cls)) + "}"
                for cls in self.frac_order
            )
            text += f" ; frac {order}"
        return text


FRAC_TOL = 1e-9
"""Fractional parts closer than this are considered equal.

Recovering a fractional part as ``value - threshold`` loses the last bits
of the original fraction, so exact float equality would spuriously split
classes of clocks that crossed a threshold together.
"""


def _classic_region_of(
    eta: Sequence[float], thresholds: tuple[tuple[int, ...], ...]
) -> Region:
    """The exact (possibly boundary) region containing a valuation."""
    ints: list[int] = []
    zero: set[int] = set()
    fracs: dict[int, float] = {}
    for x, grid in enumerate(thresholds):
        value = float(eta[x])
        if value < 0:
            raise ValueError("clock values must be nonnegative")
        if value >= grid[-1]:
            ints.append(len(grid) - 1)
            if value == grid[-1]:
                zero.add(x)
            continue
        k = bisect_right(grid, value) - 1
        ints.append(k)
        if value == grid[k]:
            zero.add(x)
        else:
            fracs[x] = (value - grid[k]) / (grid[k + 1] - grid[k])
    order_list: list[set[int]] = []
    previous = None
    for frac, x in sorted((f, x) for x, f in fracs.items()):
        if previous is None or frac - previous > FRAC_TOL:
            order_list.append(set())
        order_list[-1].add(x)
        previous = frac
    order = tuple(frozenset(cls) for cls in order_list)
    return Region(
        thresholds=thresholds,
        ints=tuple(ints),
        zero_marked=frozenset(zero),
        frac_order=order,
    )


def _merge(region: Region) -> Region:
    """Canonical non-boundary region covering the given one."""
    if not region.is_boundary:
        return region
    successor = region.delay_successor()
    assert successor is not None and not successor.is_boundary
    return successor


def region_of(eta: Sequence[float], maxima: Sequence[int]) -> Region:
    """The canonical (merged) region of a valuation on unit grids.

    Parameters
    ----------
    eta : sequence of float
        Nonnegative clock valuation.
    maxima : sequence of int
        Per clock, the largest relevant constant; the grid is 0..max.

    Returns
    -------
    Region
        The non-boundary region whose half-open merged reading contains
        ``eta``.
    """
    if len(eta) != len(maxima):
        raise ValueError("eta and maxima must have equal length")
    thresholds = tuple(tuple(range(int(c) + 1)) for c in maxima)
    return _merge(_classic_region_of(eta, thresholds))


def _region_contains(region: Region, eta: Sequence[float]) -> bool:
    """Merged membership: whether ``eta`` lies in a non-boundary region."""
    return _merge(_classic_region_of(eta, region.thresholds)) == region


def sample_valuation(region: Region, rng: np.random.Generator) -> np.ndarray:
    """Draw a valuation from the region (uniform fractional positions)."""
    n_classes = len(region.frac_order)
    fracs = np.sort(rng.uniform(0.0, 1.0, size=n_classes))
    position = {x: j for j, cls in enumerate(region.frac_order) for x in cls}
    eta = np.zeros(region.n_clocks)
    for x, k in enumerate(region.ints):
        grid = region.thresholds[x]
        if region.is_beyond(x):
            eta[x] = grid[-1] + rng.exponential()
        elif x in region.zero_marked:
            eta[x] = grid[k]
        else:
            span = grid[k + 1] - grid[k]
            eta[x] = grid[k] + span * fracs[position[x]]
    return eta


@dataclass(frozen=True)
class MarkovEdge:
    """A Markovian region-graph edge.

    ``dmta_edge`` indexes the originating DMTA edge; the probabilities of
    the Markovian edges sharing one (source vertex, dmta_edge) pair form
    the branch distribution of that jump.
    """

    source: int
    target: int
    probability: float
    resets: frozenset[int]
    dmta_edge: int


@dataclass(eq=False)
class RegionGraph:
    """A region graph over the locations of a DMTA.

    Vertices are (location index, region) pairs, indexed 0..n-1.  Each
    vertex has at most one outgoing delay edge.  ``rates`` stores the
    vertex rate Λ(v): the exit rate of the location if the vertex has an
    outgoing Markovian edge, else 0.
    """

    dmta: Dmta
    thresholds: tuple[tuple[int, ...], ...]
    vertices: tuple[tuple[int, Region], ...]
    initial: int
    delay_edges: dict[int, int]
    markov_edges: tuple[MarkovEdge, ...]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def location(self, v: int) -> int:
        return self.vertices[v][0]

    def region(self, v: int) -> Region:
        return self.vertices[v][1]

    @cached_property
    def rates(self) -> np.ndarray:
        """Vertex rates Λ: exit rate where a Markovian edge exists, else 0."""
        has_markov = {edge.source for edge in self.markov_edges}
        lam = np.array(
            [
                float(self.dmta.exit_rates[loc]) if v in has_markov else 0.0
                for v, (loc, _) in enumerate(self.vertices)
            ]
        )
        lam.setflags(write=False)
        return lam

    @cached_property
    def accepting(self) -> frozenset[int]:
        """Vertices of accepting locations (empty under Muller acceptance)."""
        if not isinstance(self.dmta.acceptance, FiniteAcceptance):
            return frozenset()
        accepting_locations = self.dmta.acceptance.locations
        return frozenset(
            v for v, (loc, _) in enumerate(self.vertices) if loc in accepting_locations
        )

    @cached_property
    def boundary_vertices(self) -> frozenset[int]:
        return frozenset(
            v for v, (_, region) in enumerate(self.vertices) if region.is_boundary
        )

    @cached_property
    def markov_from(self) -> dict[int, tuple[MarkovEdge, ...]]:
        out: dict[int, list[MarkovEdge]] = {v: [] for v in range(self.n_vertices)}
        for edge in self.markov_edges:
            out[edge.source].append(edge)
        return {v: tuple(edges) for v, edges in out.items()}

    def adjacency(self) -> dict[int, list[int]]:
        """Plain successor lists over Markovian and delay edges combined."""
        adj: dict[int, list[int]] = {v: [] for v in range(self.n_vertices)}
        for edge in self.markov_edges:
            if edge.target not in adj[edge.source]:
                adj[edge.source].append(edge.target)
        for source, target in self.delay_edges.items():
            if target not in adj[source]:
                adj[source].append(target)
        return adj

    def vertex_label(self, v: int) -> str:
        loc, region = self.vertices[v]
        name = self.dmta.location_name(loc)
        return f"{name} | {region.describe(self.dmta.clocks)} | {self.rates[v]:g}"


def _grid_thresholds(m: Dmta) -> tuple[tuple[int, ...], ...]:
    constants = sorted({c for e in m.edges for c in e.guard.constants()})
    if m.n_clocks == 1:
        return (tuple(sorted({0, *constants})),)
    top = max(constants, default=0)
    grid = tuple(range(top + 1))
    return tuple(grid for _ in range(m.n_clocks))


def build_region_graph(m: Dmta) -> RegionGraph:
    """Build the classic region graph of a DMTA.

    The graph contains every vertex reachable from (initial location, all
    clocks zero), including measure-zero boundary vertices.  Markovian
    edges leave a vertex for every DMTA edge whose guard holds throughout
    the region, one per branch of the target distribution; accepting
    locations of a finite acceptance condition are sinks, so no Markovian
    edges leave their vertices.  Delay edges follow the region's delay
    successor within the same location.
    """
    thresholds = _grid_thresholds(m)
    n = m.n_clocks
    initial_region = Region(
        thresholds=thresholds,
        ints=(0,) * n,
        zero_marked=frozenset(range(n)),
        frac_order=(),
    )
    if isinstance(m.acceptance, FiniteAcceptance):
        sink_locations = set(m.acceptance.locations)
    else:
        sink_locations = set()
    edges_by_source: dict[int, list[tuple[int, DmtaEdge]]] = {}
    for index, edge in enumerate(m.edges):
        edges_by_source.setdefault(edge.source, []).append((index, edge))

    index_of: dict[tuple[int, Region], int] = {}
    vertices: list[tuple[int, Region]] = []

    def intern(loc: int, region: Region) -> int:
        key = (loc, region)
        found = index_of.get(key)
        if found is None:
            found = len(vertices)
            index_of[key] = found
            vertices.append(key)
            queue.append(found)
        return found

    queue: deque[int] = deque()
    delay_edges: dict[int, int] = {}
    markov_edges: list[MarkovEdge] = []
    intern(m.initial, initial_region)
    while queue:
        v = queue.popleft()
        loc, region = vertices[v]
        if loc not in sink_locations:
            for edge_index, edge in edges_by_source.get(loc, ()):
                if not region.satisfies(edge.guard):
                    continue
                target_region = region.reset(edge.resets)
                for target_loc, probability in edge.targets:
                    markov_edges.append(
                        MarkovEdge(
                            source=v,
                            target=intern(target_loc, target_region),
                            probability=probability,
                            resets=edge.resets,
                            dmta_edge=edge_index,
                        )
                    )
        successor = region.delay_successor()
        if successor is not None:
            delay_edges[v] = intern(loc, successor)
    return RegionGraph(
        dmta=m,
        thresholds=thresholds,
        vertices=tuple(vertices),
        initial=0,
        delay_edges=delay_edges,
        markov_edges=tuple(markov_edges),
    )


def _rebuild(
    g: RegionGraph,
    keep: Sequence[int],
    delay_edges: Mapping[int, int],
    markov_edges: Iterable[MarkovEdge],
    initial: int,
) -> RegionGraph:
    """Reindex a subgraph onto 0..len(keep)-1 preserving vertex order."""
    remap = {old: new for new, old in enumerate(keep)}
    return RegionGraph(
        dmta=g.dmta,
        thresholds=g.thresholds,
        vertices=tuple(g.vertices[old] for old in keep),
        initial=remap[initial],
        delay_edges={
            remap[s]: remap[t]
            for s, t in delay_edges.items()
            if s in remap and t in remap
        },
        markov_edges=tuple(
            replace(e, source=remap[e.source], target=remap[e.target])
            for e in markov_edges
            if e.source in remap and e.target in remap
        ),
    )


def simplify_region_graph(g: RegionGraph) -> RegionGraph:
    """Contract every boundary vertex into its delay successor.

    Markovian edges into a boundary vertex are redirected to the successor
    (the merged region is half open from below, so it contains the reset
    valuations); Markovian edges out of boundary vertices carry no
    probability mass and are dropped.  Delay edges through a boundary
    vertex are short-circuited.  A boundary vertex without a delay
    successor cannot arise from a valid construction and raises
    ``RuntimeError``.
    """
    contract: dict[int, int] = {}
    for v in g.boundary_vertices:
        successor = g.delay_edges.get(v)
        if successor is None:
            raise RuntimeError(
                f"internal error: boundary vertex {v} has no delay successor"
            )
        contract[v] = successor

    def resolve(v: int) -> int:
        return contract.get(v, v)

    for v, w in contract.items():
        if g.region(w).is_boundary:
            raise RuntimeError(
                f"internal error: contraction target {w} is itself a boundary vertex"
            )
        expected = _merge(g.region(v))
        if g.region(w) != expected or g.location(w) != g.location(v):
            raise RuntimeError("internal error: contraction target mismatch")

    keep = [v for v in range(g.n_vertices) if v not in contract]
    delay_edges = {
        v: resolve(t)
        for v, t in g.delay_edges.items()
        if v not in contract
    }
    markov_edges = [
        replace(e, target=resolve(e.target))
        for e in g.markov_edges
        if e.source not in contract
    ]
    return _rebuild(g, keep, delay_edges, markov_edges, resolve(g.initial))


def prune_region_graph(
    g: RegionGraph, targets: Iterable[int] | None = None
) -> RegionGraph:
    """Restrict the graph to the part relevant for reaching ``targets``.

    Forward reachability treats target vertices as absorbing — a path is
    accepted the moment it ends there, so nothing beyond them needs to be
    explored — and is intersected with backward reachability of the target
    set.  The initial vertex is always kept.  The result is the induced
    subgraph: every edge between kept vertices survives, including delay
    edges between target vertices.

    Parameters
    ----------
    g : RegionGraph
        Graph to prune (typically already simplified).
    targets : iterable of int, optional
        Target vertex set; defaults to ``g.accepting``.
    """
    target_set = set(g.accepting if targets is None else targets)
    adjacency = g.adjacency()
    forward: set[int] = set()
    queue: deque[int] = deque([g.initial])
    forward.add(g.initial)
    while queue:
        v = queue.popleft()
        if v in target_set:
            continue
        for w in adjacency[v]:
            if w not in forward:
                forward.add(w)
                queue.append(w)
    reverse: dict[int, list[int]] = {v: [] for v in range(g.n_vertices)}
    for v, succs in adjacency.items():
        for w in succs:
            reverse[w].append(v)
    backward: set[int] = set(target_set)
    queue = deque(backward)
    while queue:
        v = queue.popleft()
        for w in reverse[v]:
            if w not in backward:
                backward.add(w)
                queue.append(w)
    kept = (forward & backward) | {g.initial}
    keep = [v for v in range(g.n_vertices) if v in kept]
    delay_edges = {
        v: t for v, t in g.delay_edges.items() if v in kept and t in kept
    }
    markov_edges = [
        e for e in g.markov_edges if e.source in kept and e.target in kept
    ]
    return _rebuild(g, keep, delay_edges, markov_edges, g.initial)


@dataclass(frozen=True)
class PdpState:
    """A state of the piecewise deterministic process: (vertex, valuation).

    The valuation must lie in the vertex's region (merged reading).
    Between jumps all clocks grow at rate one, so the flow is
    ``eta + t`` until :func:`boundary_hit_time` elapses.
    """

    graph: RegionGraph
    vertex: int
    eta: np.ndarray

    def __post_init__(self) -> None:
        region = self.graph.region(self.vertex)
        if len(self.eta) != region.n_clocks:
            raise ValueError("valuation dimension does not match the region")
        if not _region_contains(region, self.eta):
            raise ValueError(
                f"valuation {np.asarray(self.eta)} outside region "
                f"{region.describe(self.graph.dmta.clocks)}"
            )


def boundary_hit_time(st: PdpState) -> float:
    """Time until the flow from ``st`` leaves the current region.

    Returns the smallest distance from a clock to its next threshold, or
    ``inf`` when every clock is beyond its last threshold (the region is
    invariant under time flow).
    """
    region = st.graph.region(st.vertex)
    if region.is_boundary:
        return 0.0
    best = math.inf
    for x, k in enumerate(region.ints):
        if region.is_beyond(x):
            continue
        best = min(best, region.thresholds[x][k + 1] - float(st.eta[x]))
    return best


def embedded_jump_probability(
    st: PdpState,
    target_vertices: Iterable[int],
    rate: float,
    branches: Mapping[int, float],
) -> float:
    """One-step probability that the process jumps from ``st`` into a set.

    Integrates the in-region jump density ``rate * exp(-rate * t)`` over
    the time to the region boundary and adds the boundary (delay) term:
    with ``b`` the boundary hit time and ``q`` the branch mass landing in
    the target set,

    ``q * (1 - exp(-rate*b)) + [delay successor in set] * exp(-rate*b)``.

    With ``rate == 0`` only the boundary term remains; with ``b == inf``
    only the in-region term.  If additionally ``b == inf`` the process
    never moves and the probability is 0.

    Parameters
    ----------
    st : PdpState
        Current state.
    target_vertices : iterable of int
        Vertex set A to be entered.
    rate : float
        Exponential jump rate Λ at the current vertex.
    branches : mapping of int to float
        Probability per target vertex for an in-region jump.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    targets = set(target_vertices)
    in_region = sum(p for v, p in branches.items() if v in targets)
    b = boundary_hit_time(st)
    if math.isinf(b):
        return in_region if rate > 0 else 0.0
    delay_target = st.graph.delay_edges.get(st.vertex)
    on_boundary = 1.0 if delay_target in targets else 0.0
    if rate == 0:
        return on_boundary
    survival = math.exp(-rate * b)
    return in_region * (1.0 - survival) + on_boundary * survival


def export_dot(g: RegionGraph) -> str:
    """Render the region graph in Graphviz dot format.

    Vertex labels follow ``"location | region string | rate"``; accepting
    vertices are drawn with double borders, delay edges dashed.
    """
    lines = ["digraph region_graph {", "  rankdir=LR;", "  node [shape=box];"]
    for v in range(g.n_vertices):
        attrs = [f'label="{g.vertex_label(v)}"']
        if v in g.accepting:
            attrs.append("peripheries=2")
        if v == g.initial:
            attrs.append("penwidth=2")
        lines.append(f"  v{v} [{', '.join(attrs)}];")
    for edge in g.markov_edges:
        label = f"{edge.probability:g}"
        if edge.resets:
            names = ",".join(
                sorted(g.dmta.clocks[x] for x in edge.resets)
            )
            label = f"reset {{{names}}}, {label}"
        lines.append(f'  v{edge.source} -> v{edge.target} [label="{label}"];')
    for source, target in sorted(g.delay_edges.items()):
        lines.append(
            f'  v{source} -> v{target} [label="delay", style=dashed];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
