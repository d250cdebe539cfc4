"""Monte Carlo estimation of acceptance probabilities by path replay.

Sample paths of the chain are replayed through the specification
automaton in lockstep over vectorized shards.  A path decides as early
as its region-graph vertex allows: entering an accepting location (or,
under Muller acceptance, any bottom strongly connected component)
decides immediately, a missing enabled edge rejects, and a vertex from
which acceptance is unreachable rejects without further sampling.  Paths
still open after the transition budget are reported undecided, and the
exact value always lies between the all-reject and all-accept readings
of the undecided mass.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .markov import Ctmc, bottom_sccs
from .muller import _traversable, accepting_bsccs
from .product import build_product
from .regions import (
    RegionGraph,
    _classic_region_of,
    _merge,
    build_region_graph,
    simplify_region_graph,
)
from .timed import Dta, MullerAcceptance, validate_dta

__all__ = ["Estimate", "SimConfig", "simulate_acceptance"]

_SHARD = 65536
"""Paths per vectorized shard; fixed so results are seed-reproducible."""


@dataclass(frozen=True)
class SimConfig:
    """Sampling parameters for the Monte Carlo estimator.

    Parameters
    ----------
    n : int
        Number of sampled paths.
    max_steps : int
        Transition budget per path; paths still open afterwards count as
        undecided.
    seed : int
        Root seed; shard streams are derived as (seed, shard index), so
        identical configurations give bit-identical estimates.
    confidence : float
        Confidence level of the reported interval, in (0, 1).
    """

    n: int = 100_000
    max_steps: int = 10_000
    seed: int = 0
    confidence: float = 0.99

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("sample count must be at least 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie strictly between 0 and 1")


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its confidence interval and counts.

    ``p_hat`` is the accepted fraction of the *decided* paths; undecided
    paths are excluded from the point estimate and reported separately.
    The half-width is the normal-approximation (Wald) interval on the
    decided sample, replaced by the (wider, asymmetric) Wilson bound when
    the estimate is within 0.01 of either endpoint.
    """

    p_hat: float
    half_width: float
    accepted: int
    rejected: int
    undecided: int
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("point estimate must lie in [0, 1]")
        if min(self.accepted, self.rejected, self.undecided) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.accepted + self.rejected + self.undecided

    @property
    def decided(self) -> int:
        return self.accepted + self.rejected

    @property
    def p_low(self) -> float:
        """Lower bracket: every undecided path read as rejecting."""
        return self.accepted / self.n

    @property
    def p_high(self) -> float:
        """Upper bracket: every undecided path read as accepting."""
        return (self.accepted + self.undecided) / self.n

    @property
    def interval(self) -> tuple[float, float]:
        return (
            max(0.0, self.p_hat - self.half_width),
            min(1.0, self.p_hat + self.half_width),
        )


def _backward_reach(adjacency: dict[int, list[int]],
                    targets: frozenset[int], n: int) -> np.ndarray:
    reverse: dict[int, list[int]] = {v: [] for v in range(n)}
    for v, succs in adjacency.items():
        for w in succs:
            reverse[w].append(v)
    seen = np.zeros(n, dtype=bool)
    queue: deque[int] = deque(targets)
    seen[list(targets)] = True
    while queue:
        v = queue.popleft()
        for w in reverse[v]:
            if not seen[w]:
                seen[w] = True
                queue.append(w)
    return seen


class _Replay:
    """Shared, immutable tables for vectorized path replay."""

    def __init__(self, c: Ctmc, a: Dta):
        validated = validate_dta(a)
        dta = validated.dta
        self.dta = dta
        self.muller = isinstance(dta.acceptance, MullerAcceptance)
        self.d = len(dta.clocks)
        m = build_product(c, dta)
        graph = simplify_region_graph(build_region_graph(m))
        self.graph = graph
        self.cstar = max(
            (grid[-1] for grid in graph.thresholds), default=0
        )
        q_index = {name: i for i, name in enumerate(dta.locations)}
        self.q0 = q_index[dta.initial]
        # Symbol groups: replaying a jump out of state s consults the DTA
        # edges labelled with L(s).
        symbols = list(dict.fromkeys(c.labels))
        self.sid_of_state = np.array(
            [symbols.index(label) for label in c.labels], dtype=np.int64
        )
        n_sym = len(symbols)
        self.n_q = len(dta.locations)
        self.groups: dict[int, list] = {}
        for (q_name, symbol), edges in dta.edges_by_source_symbol.items():
            if symbol not in symbols:
                continue
            code = q_index[q_name] * n_sym + symbols.index(symbol)
            self.groups[code] = [
                (e.guard.atoms, tuple(sorted(e.resets)), q_index[e.target])
                for e in edges
            ]
        self.n_sym = n_sym
        # Product location of each (state, DTA location) pair.
        locmat = np.full((len(c.labels), self.n_q), -1, dtype=np.int64)
        for loc, (s, q_name) in enumerate(m.pairs):
            locmat[s, q_index[q_name]] = loc
        self.locmat = locmat
        # Vertex verdicts: +1 decides acceptance, -1 decides rejection,
        # 0 keeps the path open.
        verdict = np.zeros(graph.n_vertices, dtype=np.int8)
        if self.muller:
            union = accepting_bsccs(graph, mode="exact").union
            for component in bottom_sccs(graph.adjacency()):
                value = 1 if component <= union else -1
                for v in component:
                    verdict[v] = value
            targets = union
        else:
            targets = graph.accepting
            for v in targets:
                verdict[v] = 1
        reachable = _backward_reach(
            _traversable(graph), targets, graph.n_vertices
        )
        verdict[(~reachable) & (verdict == 0)] = -1
        self.verdict = verdict
        self.vertex_by_pair = {
            pair: v for v, pair in enumerate(graph.vertices)
        }
        self._vertex_cache: dict[tuple, int] = {}

    def classify(self, locs: np.ndarray, etas: np.ndarray) -> np.ndarray:
        """Region-graph vertex of each (product location, valuation) pair.

        The region key (per-clock segment index plus the ordering pattern
        of fractional offsets) is computed vectorized; each distinct key
        is resolved once through a representative valuation and cached.
        """
        k = len(locs)
        d = self.d
        ints = np.empty((k, d), dtype=np.int64)
        frac = np.empty((k, d))
        for i, grid_t in enumerate(self.graph.thresholds):
            grid = np.asarray(grid_t, dtype=float)
            idx = np.searchsorted(grid, etas[:, i], side="right") - 1
            idx = np.clip(idx, 0, len(grid) - 1)
            ints[:, i] = idx
            frac[:, i] = etas[:, i] - grid[idx]
        rank = np.zeros((k, d), dtype=np.int64)
        for i in range(d):
            below = np.zeros(k, dtype=np.int64)
            for j in range(d):
                below += ((frac[:, j] > 0) & (frac[:, j] < frac[:, i]))
            rank[:, i] = np.where(frac[:, i] > 0, 1 + below, 0)
        keys = np.column_stack([locs, ints, rank])
        unique, inverse = np.unique(keys, axis=0, return_inverse=True)
        vertex_of_key = np.empty(len(unique), dtype=np.int64)
        for u, row in enumerate(map(tuple, unique)):
            cached = self._vertex_cache.get(row)
            if cached is None:
                cached = self._resolve(row)
                self._vertex_cache[row] = cached
            vertex_of_key[u] = cached
        return vertex_of_key[inverse]

    def _resolve(self, row: tuple) -> int:
        d = self.d
        loc = int(row[0])
        rep = []
        for i in range(d):
            grid = self.graph.thresholds[i]
            seg, r = int(row[1 + i]), int(row[1 + d + i])
            if r == 0:
                rep.append(float(grid[seg]))
            elif seg == len(grid) - 1:
                rep.append(grid[-1] + r / (d + 1.0))
            else:
                span = grid[seg + 1] - grid[seg]
                rep.append(grid[seg] + span * r / (d + 1.0))
        region = _merge(_classic_region_of(rep, self.graph.thresholds))
        return self.vertex_by_pair.get((loc, region), -1)

    def verdicts(self, vertices: np.ndarray) -> np.ndarray:
        out = np.zeros(len(vertices), dtype=np.int8)
        known = vertices >= 0
        out[known] = self.verdict[vertices[known]]
        return out


def _run_shard(tables: _Replay, c: Ctmc, cfg: SimConfig, shard: int,
               count: int) -> tuple[int, int, int]:
    """Replay one shard; returns (accepted, rejected, undecided)."""
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, shard)))
    d = tables.d
    exit_rates = np.asarray(c.exit_rates, dtype=float)
    cum_jump = np.cumsum(np.asarray(c.jump_matrix, dtype=float), axis=1)
    n_states = len(c.labels)

    state = np.full(count, c.initial, dtype=np.int64)
    q = np.full(count, tables.q0, dtype=np.int64)
    eta = np.zeros((count, d))
    accepted = 0
    rejected = 0

    first = tables.verdicts(
        tables.classify(tables.locmat[state[:1], q[:1]], eta[:1])
    )[0]
    if first == 1:
        return count, 0, 0
    if first == -1:
        return 0, count, 0

    alive = np.arange(count)
    beyond = tables.cstar + 1.5
    for _ in range(cfg.max_steps):
        if alive.size == 0:
            break
        # Time-locked states never jump again: the run's vertex drifts to
        # the top region, whose verdict (if any) is final.
        rates = exit_rates[state[alive]]
        locked = rates <= 0.0
        if locked.any():
            frozen = alive[locked]
            if tables.muller:
                vertices = tables.classify(
                    tables.locmat[state[frozen], q[frozen]],
                    eta[frozen] + beyond,
                )
                verd = tables.verdicts(vertices)
                accepted += int(np.count_nonzero(verd == 1))
                rejected += int(np.count_nonzero(verd != 1))
            else:
                rejected += frozen.size
            alive = alive[~locked]
            rates = rates[~locked]
            if alive.size == 0:
                break
        tau = rng.standard_exponential(alive.size) / rates
        eta[alive] += tau[:, None]
        # Delay endpoint: entering a decided vertex settles the path even
        # before the jump fires (decided sets are closed under delay).
        verd = tables.verdicts(
            tables.classify(tables.locmat[state[alive], q[alive]], eta[alive])
        )
        accepted += int(np.count_nonzero(verd == 1))
        rejected += int(np.count_nonzero(verd == -1))
        alive = alive[verd == 0]
        if alive.size == 0:
            break
        # Jump: the symbol read is the label of the state being left.
        u = rng.random(alive.size)
        successor = np.minimum(
            (u[:, None] > cum_jump[state[alive]]).sum(axis=1), n_states - 1
        )
        code = q[alive] * tables.n_sym + tables.sid_of_state[state[alive]]
        taken = np.full(alive.size, -1, dtype=np.int64)
        new_q = np.empty(alive.size, dtype=np.int64)
        # Guards are checked against the pre-reset valuations; paths that
        # already took an edge this step are excluded from later masks, so
        # their in-place resets cannot influence other evaluations.
        rows = eta[alive]
        for group_code in np.unique(code):
            edges = tables.groups.get(int(group_code))
            members = code == group_code
            if edges is None:
                continue
            for atoms, resets, target_q in edges:
                enabled = members & (taken == -1)
                if not enabled.any():
                    continue
                mask = enabled.copy()
                for at in atoms:
                    x = rows[:, at.clock]
                    if at.op == "<":
                        mask &= x < at.const
                    elif at.op == "<=":
                        mask &= x <= at.const
                    elif at.op == ">":
                        mask &= x > at.const
                    else:
                        mask &= x >= at.const
                if not mask.any():
                    continue
                taken[mask] = 1
                new_q[mask] = target_q
                if resets:
                    eta[np.ix_(alive[mask], list(resets))] = 0.0
        stuck = taken == -1
        rejected += int(np.count_nonzero(stuck))
        moving = ~stuck
        idx = alive[moving]
        state[idx] = successor[moving]
        q[idx] = new_q[moving]
        verd = tables.verdicts(
            tables.classify(tables.locmat[state[idx], q[idx]], eta[idx])
        )
        accepted += int(np.count_nonzero(verd == 1))
        rejected += int(np.count_nonzero(verd == -1))
        alive = idx[verd == 0]
    return accepted, rejected, count - accepted - rejected


def _interval_half_width(accepted: int, decided: int,
                         confidence: float) -> float:
    if decided == 0:
        return 1.0
    z = float(norm.ppf(0.5 * (1.0 + confidence)))
    p = accepted / decided
    if 0.01 <= p <= 0.99:
        return z * np.sqrt(p * (1.0 - p) / decided)
    # Wilson bounds behave at the endpoints; report the larger distance
    # from the raw estimate so the symmetric interval covers them.
    denom = 1.0 + z * z / decided
    center = (p + z * z / (2 * decided)) / denom
    half = (
        z
        * np.sqrt(p * (1.0 - p) / decided + z * z / (4 * decided * decided))
        / denom
    )
    return float(max(p - (center - half), (center + half) - p))


def simulate_acceptance(c: Ctmc, a: Dta, cfg: SimConfig = SimConfig()) -> Estimate:
    """Estimate the acceptance probability by replaying sampled paths.

    Paths are processed in fixed-size shards, each with an RNG stream
    derived from (seed, shard index); counts are summed over shards, so
    the result does not depend on processing order and is bit-identical
    across runs with the same configuration.

    Parameters
    ----------
    c : Ctmc
        The chain to sample.
    a : Dta
        Specification automaton (finite or Muller acceptance).
    cfg : SimConfig
        Sampling parameters.

    Returns
    -------
    Estimate
    """
    tables = _Replay(c, a)
    accepted = rejected = undecided = 0
    shard = 0
    remaining = cfg.n
    while remaining > 0:
        count = min(_SHARD, remaining)
        acc, rej, und = _run_shard(tables, c, cfg, shard, count)
        accepted += acc
        rejected += rej
        undecided += und
        shard += 1
        remaining -= count
    decided = accepted + rejected
    p_hat = accepted / decided if decided else 0.0
    half = _interval_half_width(accepted, decided, cfg.confidence)
    return Estimate(
        p_hat=p_hat,
        half_width=float(half),
        accepted=accepted,
        rejected=rejected,
        undecided=undecided,
        confidence=cfg.confidence,
    )
