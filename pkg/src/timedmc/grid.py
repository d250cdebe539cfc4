"""Numerical least-fixpoint solver on a clock-valuation grid.

Values U(location, eta) -- the probability of acceptance from a product
location with clock valuation eta -- satisfy a Volterra-type system: each
location integrates, over the guard-enabled delay window of each outgoing
edge, the sojourn density against the value of the jump target with reset
clocks zeroed.  This module solves the system by monotone value iteration
over a uniform grid with step h:

* grid nodes are integer multiples of h and guard constants are node-aligned,
  so every enabled window has node endpoints (computed exactly in integer
  index arithmetic);
* the quadrature is a composite trapezoid on the continuation value with the
  exponential sojourn factor integrated exactly on every step (product
  integration), which keeps the per-step weights shift-invariant and lets a
  single backward suffix-sum sweep price every window start at once;
* valuations are clamped one unit beyond the largest guard constant -- all
  valuations past every constant are region-equivalent, so the clamped node
  represents the whole tail exactly.

Iterates start from the pointwise-least admissible field (one on accepting
locations, zero elsewhere) and are clamped nondecreasing, so they converge
to the least fixpoint from below.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .markov import Ctmc
from .product import Dmta, DmtaEdge, build_product
from .regions import (
    RegionGraph,
    _classic_region_of,
    _merge,
    build_region_graph,
    prune_region_graph,
    simplify_region_graph,
)
from .report import PhaseTimer, VerificationReport
from .timed import (
    ClockConstraint,
    Dta,
    FiniteAcceptance,
    time_bound_transform,
    validate_dta,
)

__all__ = [
    "ConvergenceError",
    "GridSpec",
    "ValueField",
    "check_time_bounded",
    "dump_field_csv",
    "grid_reach_probability",
    "solve_grid",
    "value_iterate",
]

_FAR = 1 << 31
"""Index sentinel for 'no upper guard bound'; far past any clamp."""


class ConvergenceError(RuntimeError):
    """Value iteration hit its sweep budget before the residual target."""

    def __init__(self, message: str, *, residual: float, iterations: int,
                 probability: float):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.probability = probability


@dataclass(frozen=True)
class GridSpec:
    """Discretization parameters for grid value iteration.

    Parameters
    ----------
    h : float
        Requested grid step in time units; snapped to 1/round(1/h) so that
        integer guard constants fall on nodes.
    slack : int
        Units added past the largest guard constant before clamping; must be
        at least one so the clamp node lies strictly beyond every constant.
    eps_fix : float
        Sup-norm residual below which the iteration is declared converged.
    n_max : int or None
        Sweep budget; ``None`` resolves to ten times the pruned region-graph
        vertex count.
    interpolation : str
        Off-node field queries interpolate multilinearly (the only order
        supported).
    """

    h: float = 0.01
    slack: int = 1
    eps_fix: float = 1e-6
    n_max: int | None = None
    interpolation: str = "multilinear"

    def __post_init__(self):
        if not (self.h > 0.0):
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.slack < 1:
            raise ValueError(f"clamp slack must be at least 1, got {self.slack}")
        if not (self.eps_fix > 0.0):
            raise ValueError(f"eps_fix must be positive, got {self.eps_fix}")
        if self.n_max is not None and self.n_max < 1:
            raise ValueError(f"n_max must be at least 1, got {self.n_max}")
        if self.interpolation != "multilinear":
            raise ValueError("only multilinear interpolation is supported")

    @property
    def nodes_per_unit(self) -> int:
        return max(1, round(1.0 / self.h))


@dataclass(frozen=True)
class ValueField:
    """Converged value array over (product location, grid point).

    ``values[loc][k_1, ..., k_d]`` holds the value at clock valuation
    ``(k_1 h, ..., k_d h)`` with ``h = 1 / nodes_per_unit``; every clock is
    clamped at ``clamp`` time units.  Accepting locations are pinned to one.
    """

    location_names: tuple[str, ...]
    clocks: tuple[str, ...]
    nodes_per_unit: int
    clamp: int
    values: np.ndarray = field(repr=False)

    @property
    def step(self) -> float:
        return 1.0 / self.nodes_per_unit

    def at(self, location: int, eta: Sequence[float]) -> float:
        """Multilinear interpolation of the field at an arbitrary valuation."""
        if len(eta) != len(self.clocks):
            raise ValueError("valuation arity does not match the clock count")
        grid = self.values[location]
        top = self.clamp * self.nodes_per_unit
        coords = [min(max(float(x), 0.0) * self.nodes_per_unit, top) for x in eta]
        lows = [min(int(math.floor(c)), top - 1) if top else 0 for c in coords]
        fracs = [c - lo for c, lo in zip(coords, lows)]
        value = 0.0
        for corner in range(1 << len(coords)):
            weight = 1.0
            idx = []
            for i in range(len(coords)):
                if corner >> i & 1:
                    weight *= fracs[i]
                    idx.append(lows[i] + 1)
                else:
                    weight *= 1.0 - fracs[i]
                    idx.append(lows[i])
            if weight:
                value += weight * float(grid[tuple(idx)])
        return min(max(value, 0.0), 1.0)


def dump_field_csv(field_: ValueField, path: str) -> None:
    """Write the converged field as CSV rows (location, coordinates, value)."""
    h = field_.step
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["location", *field_.clocks, "value"])
        for loc, name in enumerate(field_.location_names):
            grid = field_.values[loc]
            for idx in np.ndindex(*grid.shape):
                writer.writerow(
                    [name, *(f"{k * h:.10g}" for k in idx), f"{grid[idx]:.12g}"]
                )


class _Engine:
    """Shared geometry: node coordinates, suffix-sum order, window algebra."""

    def __init__(self, m: Dmta, spec: GridSpec):
        self.m = m
        self.spec = spec
        self.n = spec.nodes_per_unit
        self.d = m.n_clocks
        constants = {c for e in m.edges for c in e.guard.constants()}
        self.cstar = max(constants, default=0)
        self.clamp = self.cstar + spec.slack
        self.K = self.clamp * self.n
        self.shape = (self.K + 1,) * self.d
        coords = np.indices(self.shape).reshape(self.d, -1)
        self.coords = coords
        strides = np.empty(self.d, dtype=np.int64)
        acc = 1
        for i in reversed(range(self.d)):
            strides[i] = acc
            acc *= self.K + 1
        self.strides = strides
        # Diagonal successor (all clocks +1, clamped) and a processing order
        # by decreasing distance-to-corner, so suffix sums fill backward.
        succ = np.minimum(coords + 1, self.K)
        self.succ_flat = (succ * strides[:, None]).sum(axis=0)
        depth = self.K - coords.min(axis=0)
        order = np.argsort(depth, kind="stable")
        bounds = np.searchsorted(depth[order], np.arange(self.K + 2))
        self.levels = [order[bounds[l] : bounds[l + 1]] for l in range(self.K + 1)]

    def weights(self, rate: float) -> tuple[float, float, float]:
        """Per-step decay and trapezoid weights for one exit rate."""
        eh = rate / self.n
        gamma = math.exp(-eh)
        mass = -math.expm1(-eh)
        w1 = mass / eh - gamma
        w0 = mass - w1
        return gamma, w0, w1

    def window(self, guard: ClockConstraint) -> tuple[np.ndarray, np.ndarray]:
        """Enabled delay window per node, as [j_a, j_b) in step indices."""
        j_a = np.zeros(self.coords.shape[1], dtype=np.int64)
        j_b = np.full(self.coords.shape[1], _FAR, dtype=np.int64)
        for atom in guard.atoms:
            edge_idx = atom.const * self.n - self.coords[atom.clock]
            if atom.op in (">", ">="):
                j_a = np.maximum(j_a, edge_idx)
            else:
                j_b = np.minimum(j_b, edge_idx)
        return j_a, np.maximum(j_b, 0)

    def advance_flat(self, j: np.ndarray) -> np.ndarray:
        """Flat index of each node moved j diagonal steps, clamped."""
        moved = np.minimum(self.coords + j[None, :], self.K)
        return (moved * self.strides[:, None]).sum(axis=0)

    def suffix_sums(self, w_flat: np.ndarray, gamma: float, w0: float,
                    w1: float) -> np.ndarray:
        """S(nu) = sum_j gamma^j (w0 W(nu+j) + w1 W(nu+j+1)) along diagonals."""
        a = w0 * w_flat + w1 * w_flat[self.succ_flat]
        s = np.empty_like(w_flat)
        corner = self.levels[0]
        s[corner] = w_flat[corner]
        for pts in self.levels[1:]:
            nxt = self.succ_flat[pts]
            s[pts] = a[pts] + gamma * s[nxt]
        return s

    def jump_value(self, values: np.ndarray, edge: DmtaEdge) -> np.ndarray:
        """W_e = sum of p * U(target) with reset clocks zeroed; flat array."""
        w = np.zeros(self.shape)
        for target, prob in edge.targets:
            v = values[target]
            if edge.resets:
                taken = tuple(
                    0 if x in edge.resets else slice(None) for x in range(self.d)
                )
                v = np.broadcast_to(
                    np.expand_dims(v[taken], axis=tuple(sorted(edge.resets))),
                    self.shape,
                )
            w = w + prob * v
        return w.reshape(-1)


class _EdgePlan:
    """Sweep-invariant pieces of one edge's windowed integral."""

    def __init__(self, engine: _Engine, edge: DmtaEdge, gamma: float,
                 cap: np.ndarray | None = None):
        self.edge = edge
        j_a, j_b = engine.window(edge.guard)
        if cap is not None:
            j_b = np.minimum(j_b.astype(float), cap)
        live = j_a < j_b
        self.scale_a = np.where(live, np.power(gamma, j_a.astype(float)), 0.0)
        self.flat_a = engine.advance_flat(j_a)
        j_b_idx = np.where(np.isfinite(j_b), j_b, 0).astype(np.int64)
        self.scale_b = np.where(live, np.power(gamma, j_b.astype(float)), 0.0)
        self.flat_b = engine.advance_flat(j_b_idx)

    def integral(self, s: np.ndarray) -> np.ndarray:
        return self.scale_a * s[self.flat_a] - self.scale_b * s[self.flat_b]


def _sweep_plans(engine: _Engine, locations: Iterable[int],
                 caps: dict[int, np.ndarray] | None = None):
    """Per-location decay weights and edge plans for the iterated sweep."""
    plans: dict[int, tuple[float, float, float, list[_EdgePlan]]] = {}
    for loc in locations:
        rate = float(engine.m.exit_rates[loc])
        if rate <= 0.0:
            continue
        gamma, w0, w1 = engine.weights(rate)
        cap = None if caps is None else caps[loc]
        edges = [
            _EdgePlan(engine, e, gamma, cap) for e in engine.m.edges_from[loc]
        ]
        plans[loc] = (gamma, w0, w1, edges)
    return plans


def _iterate(engine: _Engine, values: np.ndarray, plans, extra,
             eps_fix: float, n_max: int) -> tuple[int, float]:
    """Monotone double-buffered sweeps; returns (iterations, residual)."""
    residual = 0.0
    for sweep in range(1, n_max + 1):
        nxt = values.copy()
        for loc, (gamma, w0, w1, edges) in plans.items():
            total = np.zeros(engine.coords.shape[1])
            for plan in edges:
                w = engine.jump_value(values, plan.edge)
                s = engine.suffix_sums(w, gamma, w0, w1)
                total += plan.integral(s)
            if extra is not None and loc in extra:
                total += extra[loc]
            updated = np.minimum(
                np.maximum(total.reshape(engine.shape), values[loc]), 1.0
            )
            nxt[loc] = updated
        residual = float(np.max(np.abs(nxt - values))) if plans else 0.0
        values[...] = nxt
        if residual < eps_fix:
            return sweep, residual
    return n_max, residual


def _field(engine: _Engine, values: np.ndarray) -> ValueField:
    m = engine.m
    return ValueField(
        location_names=tuple(m.location_name(i) for i in range(m.n_locations)),
        clocks=m.clocks,
        nodes_per_unit=engine.n,
        clamp=engine.clamp,
        values=values,
    )


def value_iterate(
    m: Dmta,
    targets: frozenset[int] | None = None,
    spec: GridSpec = GridSpec(),
) -> tuple[ValueField, int, float]:
    """Least-fixpoint value iteration for finite acceptance on the grid.

    Parameters
    ----------
    m : Dmta
        Product automaton; must carry finite acceptance unless ``targets``
        overrides the accepting location set.
    targets : frozenset of int, optional
        Accepting product locations; defaults to the product's own set.
    spec : GridSpec
        Discretization parameters.

    Returns
    -------
    field : ValueField
        Converged (or last) iterate; accepting locations pinned to one.
    iterations : int
        Number of sweeps performed.
    residual : float
        Final sup-norm change; convergence means ``residual < spec.eps_fix``.

    Notes
    -----
    Locations whose region-graph vertices cannot reach an accepting vertex
    are zeroed permanently before iteration.  Iterates are clamped pointwise
    nondecreasing and never exceed one.
    """
    if targets is None:
        if not isinstance(m.acceptance, FiniteAcceptance):
            raise ValueError("value iteration requires finite acceptance")
        targets = frozenset(m.acceptance.locations)
    engine = _Engine(m, spec)
    values = np.zeros((m.n_locations, *engine.shape))
    for loc in targets:
        values[loc] = 1.0
    graph = simplify_region_graph(build_region_graph(m))
    target_vertices = frozenset(
        v for v in range(graph.n_vertices) if graph.location(v) in targets
    )
    if not target_vertices:
        return _field(engine, values), 0, 0.0
    pruned = prune_region_graph(graph, targets=target_vertices)
    live = {
        pruned.location(v) for v in range(pruned.n_vertices)
    } - set(targets)
    n_max = spec.n_max if spec.n_max is not None else 10 * max(1, pruned.n_vertices)
    plans = _sweep_plans(engine, sorted(live))
    iterations, residual = _iterate(engine, values, plans, None,
                                    spec.eps_fix, n_max)
    return _field(engine, values), iterations, residual


def grid_reach_probability(
    m: Dmta,
    graph: RegionGraph,
    target_vertices: frozenset[int],
    spec: GridSpec = GridSpec(),
) -> tuple[ValueField, int, float]:
    """Probability of ever entering a target region-graph vertex, on the grid.

    Unlike location-level acceptance, a target here is a (location, region)
    vertex: a sample path reaches it either by jumping into it or by delaying
    across its region boundary.  For each node the minimal delay t' into a
    target region along the diagonal ray is exact (region changes happen at
    node-aligned times), so the update adds the survival mass ``gamma^t'``
    and caps every jump window at t'.

    Parameters
    ----------
    m : Dmta
        Product automaton (any acceptance; only rates and edges are read).
    graph : RegionGraph
        Simplified region graph of ``m``; ``target_vertices`` index into it.
    target_vertices : frozenset of int
        Absorbing target vertices (e.g. the union of accepting BSCCs).
    spec : GridSpec
        Discretization parameters.

    Returns
    -------
    Same triple as :func:`value_iterate`.
    """
    engine = _Engine(m, spec)
    values = np.zeros((m.n_locations, *engine.shape))
    if not target_vertices:
        return _field(engine, values), 0, 0.0
    membership = _vertex_of_nodes(engine, graph)
    pruned = prune_region_graph(graph, targets=target_vertices)
    live = {pruned.location(v) for v in range(pruned.n_vertices)}
    caps: dict[int, np.ndarray] = {}
    extra: dict[int, np.ndarray] = {}
    iterated: list[int] = []
    for loc in sorted(live):
        in_target = np.isin(membership[loc], tuple(target_vertices))
        t_prime = _entry_steps(engine, in_target)
        if float(engine.m.exit_rates[loc]) <= 0.0:
            # No further jumps: the ray is swept with certainty.
            values[loc] = np.isfinite(t_prime).astype(float).reshape(engine.shape)
            continue
        caps[loc] = t_prime
        gamma, _, _ = engine.weights(float(engine.m.exit_rates[loc]))
        with np.errstate(invalid="ignore"):
            extra[loc] = np.where(
                np.isfinite(t_prime), np.power(gamma, t_prime), 0.0
            )
        iterated.append(loc)
    n_max = spec.n_max if spec.n_max is not None else 10 * max(1, pruned.n_vertices)
    plans = _sweep_plans(engine, iterated, caps)
    iterations, residual = _iterate(engine, values, plans, extra,
                                    spec.eps_fix, n_max)
    return _field(engine, values), iterations, residual


def _vertex_of_nodes(engine: _Engine, graph: RegionGraph) -> np.ndarray:
    """Region-graph vertex id (or -1) of every (location, node) pair.

    Node coordinates are exact multiples of h, so each node's region key --
    integer parts plus the order/equality/zeroness pattern of fractional
    parts -- is computed in integer arithmetic and classified once per
    distinct key via a representative valuation.
    """
    n, cstar, d = engine.n, engine.cstar, engine.d
    ints = np.minimum(engine.coords // n, cstar)
    rem = engine.coords - ints * n
    # Rank fractional parts preserving order, equality, and zeroness: the
    # exact counts do not matter, only the induced pattern.
    rank = np.zeros_like(rem)
    for i in range(d):
        below = np.zeros(rem.shape[1], dtype=np.int64)
        for j in range(d):
            below += ((rem[j] > 0) & (rem[j] < rem[i])).astype(np.int64)
        rank[i] = np.where(rem[i] > 0, 1 + below, 0)
    keys = np.concatenate([ints, rank], axis=0).T
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    vertex_by_pair = {
        (loc, region): v for v, (loc, region) in enumerate(graph.vertices)
    }
    lookup = np.full((engine.m.n_locations, len(unique)), -1, dtype=np.int64)
    for u, row in enumerate(unique):
        rep = [row[i] + row[d + i] / (d + 1.0) for i in range(d)]
        region = _merge(_classic_region_of(rep, graph.thresholds))
        for loc in range(engine.m.n_locations):
            lookup[loc, u] = vertex_by_pair.get((loc, region), -1)
    return lookup[:, inverse]


def _entry_steps(engine: _Engine, in_target: np.ndarray) -> np.ndarray:
    """Minimal diagonal steps from each node into the target set (inf if never)."""
    t = np.where(in_target, 0.0, np.inf)
    for pts in engine.levels[1:]:
        nxt = engine.succ_flat[pts]
        t[pts] = np.where(in_target[pts], 0.0, t[nxt] + 1.0)
    return t


def solve_grid(c: Ctmc, a: Dta, spec: GridSpec = GridSpec()) -> VerificationReport:
    """Verify a finite-acceptance property numerically on the grid.

    Raises
    ------
    ConvergenceError
        If the sweep budget is exhausted before the residual target; the
        partial probability and final residual ride on the exception.
    ValueError
        For Muller acceptance (use the Muller checker instead).
    """
    timer = PhaseTimer()
    with timer.phase("validate"):
        checked = validate_dta(a)
        if not isinstance(checked.dta.acceptance, FiniteAcceptance):
            raise ValueError("grid solver requires finite acceptance")
    with timer.phase("product"):
        m = build_product(c, checked.dta)
    with timer.phase("iterate"):
        field_, iterations, residual = value_iterate(m, spec=spec)
    probability = field_.at(m.initial, (0.0,) * m.n_clocks)
    statistics = {
        "locations": m.n_locations,
        "clocks": m.n_clocks,
        "grid_points": int(np.prod(field_.values.shape[1:])),
        "step": field_.step,
        "clamp": field_.clamp,
        "iterations": iterations,
        "residual": residual,
    }
    if residual >= spec.eps_fix and iterations > 0:
        raise ConvergenceError(
            f"value iteration did not converge within {iterations} sweeps "
            f"(residual {residual:.3g} >= eps_fix {spec.eps_fix:.3g})",
            residual=residual,
            iterations=iterations,
            probability=probability,
        )
    return VerificationReport(
        probability=probability,
        method="grid",
        acceptance="finite",
        error_bound=None,
        statistics=statistics,
        timings_ms=timer.timings_ms,
        warnings=checked.warnings,
    )


def check_time_bounded(
    c: Ctmc, a: Dta, t_f, spec: GridSpec = GridSpec()
) -> VerificationReport:
    """Verify acceptance restricted to paths that accept within time t_f.

    A fresh never-reset clock bounds entry into accepting locations; the
    result is a lower bound on the unbounded answer and is nondecreasing in
    ``t_f``.  Rational bounds are scaled to integers, with all exit rates
    divided by the scale so probabilities are preserved.
    """
    bounded, scale = time_bound_transform(a, t_f)
    scaled_c = replace(c, exit_rates=c.exit_rates / float(scale))
    report = solve_grid(scaled_c, bounded, spec)
    statistics = dict(report.statistics)
    statistics["time_bound"] = float(t_f)
    statistics["time_scale"] = scale
    return replace(report, statistics=statistics)
