"""Tests for the timed-automaton layer."""
from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import atom, ab_reach_dta, ab_cycle_muller_dta, guard, random_dta, sym

from timedmc.timed import (
    TRUE,
    ClockAtom,
    ClockConstraint,
    DeterminismError,
    Dta,
    DtaEdge,
    FiniteAcceptance,
    Interval,
    dta_step,
    guard_enabled_interval,
    max_constant,
    time_bound_transform,
    validate_dta,
)


def replay_finite(a: Dta, word) -> bool:
    """Replay a timed word; accept as soon as an accepting location is hit."""
    q, eta = a.initial, np.zeros(a.n_clocks)
    accepting = a.acceptance.locations
    if q in accepting:
        return True
    for symbol, t in word:
        step = dta_step(a, q, eta, symbol, t)
        if step is None:
            return False
        q, eta = step
        if q in accepting:
            return True
    return False


class TestIntervals:
    def test_intersection_respects_openness(self):
        a = Interval(0.0, 1.0, hi_open=True)
        b = Interval(1.0, 2.0)
        meet = a.intersect(b)
        assert meet.is_empty()
        c = Interval(0.0, 1.0)
        assert not c.intersect(b).is_empty()
        assert not c.intersect(b).has_interior()

    def test_contains_boundaries(self):
        iv = Interval(1.0, 2.0, lo_open=True)
        assert not iv.contains(1.0)
        assert iv.contains(2.0)
        assert iv.contains(1.5)
        assert not iv.contains(2.5)


class TestStructuralChecks:
    def test_atom_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            ClockAtom(clock=0, op="=", const=1)
        with pytest.raises(ValueError):
            ClockAtom(clock=0, op="<", const=-1)
        with pytest.raises(ValueError):
            ClockAtom(clock=0, op="<", const=1.5)  # type: ignore[arg-type]

    def test_dta_reference_checks(self):
        with pytest.raises(ValueError, match="initial"):
            Dta(("x",), ("q0",), "q9", (), FiniteAcceptance(frozenset()))
        with pytest.raises(ValueError, match="undeclared location"):
            Dta(
                ("x",),
                ("q0",),
                "q0",
                (DtaEdge("q0", sym("a"), TRUE, frozenset(), "q9"),),
                FiniteAcceptance(frozenset()),
            )
        with pytest.raises(ValueError, match="clock index"):
            Dta(
                ("x",),
                ("q0",),
                "q0",
                (DtaEdge("q0", sym("a"), guard(atom(1, "<", 1)), frozenset(), "q0"),),
                FiniteAcceptance(frozenset()),
            )
        with pytest.raises(ValueError, match="acceptance"):
            Dta(("x",), ("q0",), "q0", (), FiniteAcceptance(frozenset({"nope"})))


class TestValidateDta:
    def test_reference_dta_is_clean(self):
        result = validate_dta(ab_reach_dta())
        assert result.warnings == ()
        assert result.dta == ab_reach_dta()

    def test_overlapping_interiors_rejected(self):
        a = ab_reach_dta()
        edges = list(a.edges)
        edges[1] = DtaEdge("q0", sym("a"), guard(atom(0, "<", 2)), frozenset({0}), "q0")
        bad = Dta(a.clocks, a.locations, a.initial, tuple(edges), a.acceptance)
        with pytest.raises(DeterminismError, match="q0"):
            validate_dta(bad)

    def test_touching_guards_warn_only(self):
        edges = (
            DtaEdge("q0", sym("a"), guard(atom(0, "<=", 1)), frozenset(), "q0"),
            DtaEdge("q0", sym("a"), guard(atom(0, ">=", 1)), frozenset(), "q1"),
        )
        a = Dta(("x",), ("q0", "q1"), "q0", edges, FiniteAcceptance(frozenset({"q1"})))
        result = validate_dta(a)
        assert any("measure-zero" in w for w in result.warnings)

    def test_point_guard_warns(self):
        edges = (
            DtaEdge("q0", sym("a"), guard(atom(0, ">=", 1), atom(0, "<=", 1)), frozenset(), "q1"),
        )
        a = Dta(("x",), ("q0", "q1"), "q0", edges, FiniteAcceptance(frozenset({"q1"})))
        result = validate_dta(a)
        assert any("empty interior" in w for w in result.warnings)

    def test_sink_normalization_drops_accepting_out_edges(self):
        edges = (
            DtaEdge("q0", sym("a"), TRUE, frozenset(), "q1"),
            DtaEdge("q1", sym("a"), TRUE, frozenset(), "q0"),
        )
        a = Dta(("x",), ("q0", "q1"), "q0", edges, FiniteAcceptance(frozenset({"q1"})))
        result = validate_dta(a)
        assert len(result.dta.edges) == 1
        assert result.dta.edges[0].source == "q0"
        assert any("sink" in w for w in result.warnings)

    def test_muller_fixture_is_valid(self):
        result = validate_dta(ab_cycle_muller_dta())
        assert result.warnings == ()


class TestGuardEnabledInterval:
    def test_upper_bounded_from_zero(self):
        g = guard(atom(0, "<", 1))
        iv = guard_enabled_interval(g, np.zeros(1))
        assert (iv.lo, iv.hi, iv.lo_open, iv.hi_open) == (0.0, 1.0, False, True)

    def test_open_window(self):
        g = guard(atom(0, ">", 1), atom(0, "<", 2))
        iv = guard_enabled_interval(g, np.zeros(1))
        assert (iv.lo, iv.hi, iv.lo_open, iv.hi_open) == (1.0, 2.0, True, True)

    def test_disjoint_per_clock_windows(self):
        g = guard(atom(0, "<", 2), atom(1, ">", 3))
        assert guard_enabled_interval(g, np.array([1.5, 1.0])) is None

    def test_agrees_with_pointwise_evaluation(self):
        rng = np.random.default_rng(47)
        ops = ["<", "<=", ">", ">="]
        for _ in range(10_000):
            n_atoms = int(rng.integers(0, 4))
            atoms = tuple(
                ClockAtom(int(rng.integers(0, 2)), str(rng.choice(ops)), int(rng.integers(0, 4)))
                for _ in range(n_atoms)
            )
            g = ClockConstraint(atoms)
            eta = rng.uniform(0.0, 3.5, size=2)
            if atoms and rng.random() < 0.3:
                probe = atoms[int(rng.integers(0, n_atoms))]
                tau = probe.const - eta[probe.clock]
                if tau < 0:
                    tau = float(rng.uniform(0.0, 4.0))
            else:
                tau = float(rng.uniform(0.0, 4.0))
            iv = guard_enabled_interval(g, eta)
            by_interval = iv is not None and iv.contains(tau)
            assert by_interval == g.satisfied(eta + tau)


class TestDtaStep:
    def test_self_loop_below_one(self):
        a = ab_reach_dta()
        q, eta = dta_step(a, "q0", np.zeros(1), sym("a"), 0.5)
        assert q == "q0"
        assert eta[0] == 0.5

    def test_reset_loop(self):
        a = ab_reach_dta()
        q, eta = dta_step(a, "q0", np.zeros(1), sym("a"), 1.5)
        assert q == "q0"
        assert eta[0] == 0.0

    def test_stuck_on_failed_guard(self):
        a = ab_reach_dta()
        assert dta_step(a, "q0", np.zeros(1), sym("b"), 0.5) is None

    def test_stuck_on_unknown_symbol(self):
        a = ab_reach_dta()
        assert dta_step(a, "q0", np.zeros(1), sym("c"), 0.5) is None

    def test_rejects_nonpositive_delay(self):
        a = ab_reach_dta()
        with pytest.raises(ValueError):
            dta_step(a, "q0", np.zeros(1), sym("a"), 0.0)

    def test_probes_never_find_two_enabled_edges(self):
        rng = np.random.default_rng(53)
        automata = [validate_dta(random_dta(rng, n_clocks=k)).dta for k in (1, 1, 2, 2, 3)]
        for _ in range(100_000 // 5):
            for a in automata:
                q = str(rng.choice(a.locations))
                symbol = sym(str(rng.choice(["a", "b"])))
                eta = rng.uniform(0.0, 5.0, size=a.n_clocks)
                t = float(rng.uniform(0.01, 5.0))
                enabled = [
                    e
                    for e in a.edges_by_source_symbol.get((q, symbol), ())
                    if e.guard.satisfied(eta + t)
                ]
                assert len(enabled) <= 1


class TestMaxConstant:
    def test_examples(self):
        assert max_constant(ab_reach_dta()) == 2
        a = Dta(
            ("x",),
            ("q0",),
            "q0",
            (DtaEdge("q0", sym("a"), TRUE, frozenset(), "q0"),),
            FiniteAcceptance(frozenset()),
        )
        assert max_constant(a) == 0


class TestTimeBoundTransform:
    def test_integer_bound_adds_deadline_atom(self):
        edges = (DtaEdge("q0", sym("a"), TRUE, frozenset(), "q1"),)
        a = Dta(("x",), ("q0", "q1"), "q0", edges, FiniteAcceptance(frozenset({"q1"})))
        b, scale = time_bound_transform(a, 10)
        assert scale == 1
        assert b.clocks == ("x", "z")
        (edge,) = b.edges
        assert edge.guard.atoms == (ClockAtom(clock=1, op="<=", const=10),)

    def test_rational_bound_scales_constants(self):
        a = ab_reach_dta()
        b, scale = time_bound_transform(a, 3.5)
        assert scale == 2
        by_target = {}
        for e in b.edges:
            by_target.setdefault(e.target, []).append(e)
        loop_constants = sorted(
            c for e in by_target["q0"] for c in e.guard.constants()
        )
        assert loop_constants == [2, 2, 4]
        (accepting_edge,) = by_target["q1"]
        z_atoms = [at for at in accepting_edge.guard.atoms if at.clock == 1]
        assert z_atoms == [ClockAtom(clock=1, op="<=", const=7)]

    def test_preserves_determinism(self):
        b, _ = time_bound_transform(ab_reach_dta(), 3.5)
        assert validate_dta(b).warnings == ()

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            time_bound_transform(ab_reach_dta(), 0)
        with pytest.raises(ValueError):
            time_bound_transform(ab_reach_dta(), -1.5)
        with pytest.raises(ValueError, match="finite"):
            time_bound_transform(ab_cycle_muller_dta(), 1)

    def test_accepted_runs_nest(self):
        a = ab_reach_dta()
        bounded, scale = time_bound_transform(a, 2)
        assert scale == 1
        rng = np.random.default_rng(59)
        accepted_bounded = 0
        for _ in range(2000):
            word = [
                (sym(str(rng.choice(["a", "b"]))), float(rng.uniform(0.05, 2.0)))
                for _ in range(int(rng.integers(1, 5)))
            ]
            if replay_finite(bounded, word):
                accepted_bounded += 1
                assert replay_finite(a, word)
        assert accepted_bounded > 0

    def test_scaled_bound_matches_deadline_semantics(self):
        a = ab_reach_dta()
        bounded, scale = time_bound_transform(a, 3.5)
        assert scale == 2
        rng = np.random.default_rng(61)
        hits = 0
        for _ in range(2000):
            word = [
                (sym(str(rng.choice(["a", "b"]))), float(rng.uniform(0.05, 2.0)))
                for _ in range(int(rng.integers(1, 5)))
            ]
            scaled_word = [(symbol, scale * t) for symbol, t in word]
            got = replay_finite(bounded, scaled_word)
            expected = _accepted_within(a, word, deadline=3.5)
            assert got == expected
            hits += got
        assert hits > 0


def _accepted_within(a: Dta, word, deadline: float) -> bool:
    q, eta, elapsed = a.initial, np.zeros(a.n_clocks), 0.0
    accepting = a.acceptance.locations
    for symbol, t in word:
        step = dta_step(a, q, eta, symbol, t)
        if step is None:
            return False
        elapsed += t
        q, eta = step
        if q in accepting:
            return elapsed <= deadline
    return False


class TestConstraintBasics:
    def test_empty_conjunction_is_true(self):
        assert TRUE.satisfied(np.array([123.0]))

    def test_clock_interval_combines_atoms(self):
        g = guard(atom(0, ">=", 1), atom(0, "<", 3))
        iv = g.clock_interval(0)
        assert (iv.lo, iv.hi, iv.lo_open, iv.hi_open) == (1.0, 3.0, False, True)
        other = g.clock_interval(1)
        assert (other.lo, other.hi) == (0.0, math.inf)
