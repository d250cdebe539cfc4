"""Finite CTMC/DTMC core.

Continuous-time Markov chains with per-state exit rates, their embedded
discrete-time chains, transient analysis by uniformization, reachability by
linear equations, bottom-SCC analysis, and timed-path sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

ROW_SUM_TOL = 1e-9


def _as_stochastic_matrix(P, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate and normalize a row-stochastic matrix (returns a read-only copy)."""
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"jump matrix must be square, got shape {P.shape}")
    if np.any(P < -tol) or np.any(P > 1 + tol):
        raise ValueError("jump matrix entries must lie in [0, 1]")
    sums = P.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > tol)[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"row {i} of jump matrix sums to {sums[i]!r}, expected 1")
    P.flags.writeable = False
    return P


@dataclass(frozen=True, eq=False)
class Ctmc:
    """Finite labeled CTMC: (states, labels, jump matrix P, exit rates E, initial).

    The sojourn in state s is exponential with rate ``exit_rates[s]``; on a jump
    the successor is drawn from row ``jump_matrix[s]``.  A state with exit rate 0
    is time-locked: no jump ever fires.
    """

    labels: tuple[frozenset[str], ...]
    jump_matrix: np.ndarray
    exit_rates: np.ndarray
    initial: int
    names: tuple[str, ...] = ()

    def __post_init__(self):
        P = _as_stochastic_matrix(self.jump_matrix)
        object.__setattr__(self, "jump_matrix", P)
        n = P.shape[0]
        labels = tuple(frozenset(l) for l in self.labels)
        if len(labels) != n:
            raise ValueError(f"expected {n} label sets, got {len(labels)}")
        object.__setattr__(self, "labels", labels)
        E = np.array(self.exit_rates, dtype=float)
        if E.shape != (n,):
            raise ValueError(f"expected {n} exit rates, got shape {E.shape}")
        if np.any(E < 0):
            raise ValueError("exit rates must be nonnegative")
        E.flags.writeable = False
        object.__setattr__(self, "exit_rates", E)
        if not (0 <= self.initial < n):
            raise ValueError(f"initial state {self.initial} out of range [0, {n})")
        names = tuple(self.names) or tuple(f"s{i}" for i in range(n))
        if len(names) != n:
            raise ValueError(f"expected {n} state names, got {len(names)}")
        object.__setattr__(self, "names", names)

    @property
    def n_states(self) -> int:
        return self.jump_matrix.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Ctmc):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.names == other.names
            and self.initial == other.initial
            and np.array_equal(self.jump_matrix, other.jump_matrix)
            and np.array_equal(self.exit_rates, other.exit_rates)
        )


@dataclass(frozen=True, eq=False)
class Dtmc:
    """Finite DTMC: the jump structure of a CTMC with the exit rates deleted."""

    transition_matrix: np.ndarray
    initial: int
    labels: tuple[frozenset[str], ...] = ()

    def __post_init__(self):
        P = _as_stochastic_matrix(self.transition_matrix)
        object.__setattr__(self, "transition_matrix", P)
        if not (0 <= self.initial < P.shape[0]):
            raise ValueError(f"initial state {self.initial} out of range")
        if self.labels:
            labels = tuple(frozenset(l) for l in self.labels)
            if len(labels) != P.shape[0]:
                raise ValueError("label count does not match state count")
            object.__setattr__(self, "labels", labels)

    @property
    def n_states(self) -> int:
        return self.transition_matrix.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dtmc):
            return NotImplemented
        return (
            self.initial == other.initial
            and self.labels == other.labels
            and np.array_equal(self.transition_matrix, other.transition_matrix)
        )


@dataclass(frozen=True)
class TimedPath:
    """Finite timed path s0 --t0--> s1 --t1--> ... ; sojourns strictly positive."""

    states: tuple[int, ...]
    sojourns: tuple[float, ...]

    def __post_init__(self):
        if len(self.states) < 1:
            raise ValueError("a timed path has at least one state")
        if len(self.sojourns) != len(self.states) - 1:
            raise ValueError("need exactly one sojourn per transition")
        if any(t <= 0 for t in self.sojourns):
            raise ValueError("sojourn times must be positive")

    @property
    def n_transitions(self) -> int:
        return len(self.sojourns)


def embedded_dtmc(c: Ctmc) -> Dtmc:
    """The embedded DTMC of ``c``: same jump matrix, labels and initial state."""
    return Dtmc(transition_matrix=c.jump_matrix, initial=c.initial, labels=c.labels)


def generator_matrix(c: Ctmc) -> np.ndarray:
    """Infinitesimal generator Q = E·P − E (rows sum to 0, off-diagonals ≥ 0)."""
    E = c.exit_rates
    Q = E[:, None] * c.jump_matrix - np.diag(E)
    return Q


def transient_matrix(c: Ctmc, t: float, eps: float = 1e-12) -> np.ndarray:
    """Transient probability matrix Π(t) = e^{Qt} via uniformization.

    Π(t)[j, m] is the probability to occupy state m at time t having started in
    state j.  The Poisson mixture is truncated once its cumulative mass reaches
    1 − eps, so each row's truncation error is at most eps.
    """
    if not (0 < eps < 1):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    n = c.n_states
    if t == 0:
        return np.eye(n)
    lam = float(np.max(c.exit_rates))
    if lam == 0.0:
        lam = 1e-12
    # Uniformized jump matrix: U = I + Q/lam.
    U = np.eye(n) + generator_matrix(c) / lam
    a = lam * t
    w = math.exp(-a)
    if w == 0.0:
        raise ValueError(f"uniformization constant {a} too large for direct Poisson weights")
    acc = w * np.eye(n)
    power = np.eye(n)
    cum = w
    k = 0
    while cum < 1.0 - eps:
        k += 1
        power = power @ U
        w *= a / k
        acc += w * power
        cum += w
    return acc


def dtmc_reachability(d: Dtmc, targets: Iterable[int]) -> np.ndarray:
    """Least solution of the reachability equations for ``targets``.

    Returns the per-state vector x with x[s] = 1 on targets, x[s] = 0 on states
    that cannot reach the targets, and x = P·x elsewhere (solved by dense LU
    after making targets and cannot-reach states absorbing).
    """
    target_set = set(int(s) for s in targets)
    if not target_set:
        raise ValueError("target set must be nonempty")
    P = d.transition_matrix
    n = P.shape[0]
    for s in target_set:
        if not (0 <= s < n):
            raise ValueError(f"target state {s} out of range")
    # States that can reach a target: reverse BFS over P > 0.
    pos = P > 0
    can_reach = np.zeros(n, dtype=bool)
    frontier = sorted(target_set)
    can_reach[frontier] = True
    while frontier:
        nxt = np.nonzero(pos[:, frontier].any(axis=1) & ~can_reach)[0]
        can_reach[nxt] = True
        frontier = nxt.tolist()
    x = np.zeros(n)
    for s in target_set:
        x[s] = 1.0
    unknown = np.nonzero(can_reach & ~np.isin(np.arange(n), sorted(target_set)))[0]
    if unknown.size:
        A = np.eye(unknown.size) - P[np.ix_(unknown, unknown)]
        b = P[np.ix_(unknown, sorted(target_set))].sum(axis=1)
        sol = np.linalg.solve(A, b)
        x[unknown] = np.clip(sol, 0.0, 1.0)
    return x


def bottom_sccs(adjacency: Mapping[Hashable, Iterable[Hashable]]) -> list[frozenset]:
    """Bottom strongly connected components of a finite directed graph.

    A component counts as a BSCC when it has no edge leaving it and contains at
    least one internal edge (a self-loop or a cycle); an isolated vertex without
    a self-loop is a dead end, not a recurrence class.
    """
    succ = {u: list(vs) for u, vs in adjacency.items()}
    for vs in list(succ.values()):
        for v in vs:
            succ.setdefault(v, [])
    index: dict[Hashable, int] = {}
    low: dict[Hashable, int] = {}
    on_stack: set[Hashable] = set()
    stack: list[Hashable] = []
    counter = [0]
    sccs: list[list[Hashable]] = []
    scc_of: dict[Hashable, int] = {}

    for root in succ:
        if root in index:
            continue
        # Iterative Tarjan to avoid recursion limits on long chains.
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            u, it = work[-1]
            advanced = False
            for v in it:
                if v not in index:
                    index[v] = low[v] = counter[0]
                    counter[0] += 1
                    stack.append(v)
                    on_stack.add(v)
                    work.append((v, iter(succ[v])))
                    advanced = True
                    break
                if v in on_stack:
                    low[u] = min(low[u], index[v])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[u])
            if low[u] == index[u]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    scc_of[w] = len(sccs)
                    if w == u:
                        break
                sccs.append(comp)

    result = []
    for i, comp in enumerate(sccs):
        members = set(comp)
        has_internal = False
        leaves = False
        for u in comp:
            for v in succ[u]:
                if v in members:
                    has_internal = True
                else:
                    leaves = True
        if not leaves and has_internal:
            result.append(frozenset(comp))
    return result


def sample_timed_path(c: Ctmc, rng: np.random.Generator, max_steps: int) -> TimedPath:
    """Sample a timed path from the initial state.

    Sojourns are exponential with the state's exit rate; a state with exit rate
    0 is time-locked and ends the path.  At most ``max_steps`` transitions.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    states = [c.initial]
    sojourns: list[float] = []
    s = c.initial
    for _ in range(max_steps):
        rate = c.exit_rates[s]
        if rate == 0.0:
            break
        t = float(rng.exponential(1.0 / rate))
        if t <= 0.0:  # exclude measure-zero zeros so TimedPath invariants hold
            t = np.nextafter(0.0, 1.0)
        nxt = int(rng.choice(c.n_states, p=c.jump_matrix[s]))
        sojourns.append(t)
        states.append(nxt)
        s = nxt
    return TimedPath(states=tuple(states), sojourns=tuple(sojourns))
