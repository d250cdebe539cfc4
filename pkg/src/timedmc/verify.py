"""Engine dispatch shared by the command line and the HTTP service.

:func:`verify` picks a verification engine from the requested method, the
automaton's acceptance condition, and the clock count, then returns the
engine's :class:`~timedmc.VerificationReport`.  Bad option combinations
raise :class:`OptionsError`, which callers present as usage errors, distinct
from model validation errors.
"""
from __future__ import annotations

import math

from .grid import GridSpec, check_time_bounded, solve_grid
from .markov import Ctmc
from .muller import check_muller, qualitative_check
from .report import PhaseTimer, VerificationReport
from .simulate import SimConfig, simulate_acceptance
from .single_clock import solve_single_clock
from .timed import Dta, MullerAcceptance

__all__ = ["OptionsError", "verify"]

METHODS = ("auto", "single_clock", "grid", "simulate", "qualitative")
QUALITATIVE_MODES = ("positive", "almost_sure")

SINGLE_CLOCK_EPS = 1e-12
GRID_EPS = 1e-6


class OptionsError(ValueError):
    """The requested options contradict each other or the given models."""


def _normalize(name: str | None) -> str | None:
    return None if name is None else name.replace("-", "_")


def _pick_method(method: str | None, qualitative: str | None, kind: str, a: Dta) -> str:
    method = _normalize(method) or "auto"
    if method not in METHODS:
        raise OptionsError(f"unknown method {method!r}; expected one of {METHODS}")
    if qualitative is not None and method not in ("auto", "qualitative"):
        raise OptionsError(f"a qualitative mode cannot be combined with method {method!r}")
    if method == "qualitative" and qualitative is None:
        raise OptionsError("the qualitative method needs a mode: positive or almost-sure")
    if method == "auto":
        if qualitative is not None:
            return "qualitative"
        if kind == "muller":
            return "muller_auto"
        return "single_clock" if a.n_clocks == 1 else "grid"
    return method


def verify(
    c: Ctmc,
    a: Dta,
    *,
    method: str = "auto",
    qualitative: str | None = None,
    acceptance: str | None = None,
    time_bound: float | None = None,
    grid_step: float = 0.01,
    epsilon: float | None = None,
    max_sweeps: int | None = None,
    samples: int = 100_000,
    seed: int = 0,
    max_steps: int = 10_000,
    confidence: float = 0.99,
) -> VerificationReport:
    """Verify ``Pr(c accepts under a)`` with the engine the options select.

    Parameters
    ----------
    method : str
        ``auto`` (default), ``single-clock``, ``grid``, ``simulate`` or
        ``qualitative``.  ``auto`` picks the exact single-clock solver for
        one-clock finite acceptance, the grid solver for more clocks, and
        the bottom-SCC reduction for Muller acceptance.
    qualitative : str, optional
        ``positive`` or ``almost-sure``; implies the qualitative method.
    acceptance : str, optional
        Assert the expected acceptance kind (``finite`` or ``muller``); a
        mismatch with the automaton is an :class:`OptionsError`.
    time_bound : float, optional
        Restrict acceptance to paths accepting within this time (finite
        acceptance only; solved on the grid).
    grid_step, epsilon : float
        Grid step and convergence/accuracy tolerance.  ``epsilon`` defaults
        to the engine's own tolerance when omitted.
    max_sweeps : int, optional
        Sweep budget for grid value iteration (defaults to the solver's
        vertex-count heuristic).
    samples, seed, max_steps, confidence
        Simulation parameters (``simulate`` method only).

    Raises
    ------
    OptionsError
        If the options contradict each other or the models.
    """
    kind = "muller" if isinstance(a.acceptance, MullerAcceptance) else "finite"
    expected = _normalize(acceptance)
    if expected is not None:
        if expected not in ("finite", "muller"):
            raise OptionsError(f"unknown acceptance kind {expected!r}; expected finite or muller")
        if expected != kind:
            raise OptionsError(
                f"requested {expected} acceptance, but the automaton declares {kind} acceptance"
            )

    mode = _normalize(qualitative)
    if mode is not None and mode not in QUALITATIVE_MODES:
        raise OptionsError(
            f"unknown qualitative mode {qualitative!r}; expected positive or almost-sure"
        )
    if not grid_step > 0.0:
        raise OptionsError(f"grid step must be positive, got {grid_step}")
    if epsilon is not None and not epsilon > 0.0:
        raise OptionsError(f"epsilon must be positive, got {epsilon}")
    if max_sweeps is not None and max_sweeps < 1:
        raise OptionsError(f"sweep budget must be at least 1, got {max_sweeps}")
    if samples < 1:
        raise OptionsError(f"sample count must be at least 1, got {samples}")
    if max_steps < 1:
        raise OptionsError(f"step budget must be at least 1, got {max_steps}")
    if seed < 0:
        raise OptionsError(f"seed must be nonnegative, got {seed}")
    if not 0.0 < confidence < 1.0:
        raise OptionsError(f"confidence must lie strictly between 0 and 1, got {confidence}")

    picked = _pick_method(method, mode, kind, a)
    spec = GridSpec(
        h=grid_step,
        eps_fix=GRID_EPS if epsilon is None else epsilon,
        n_max=max_sweeps,
    )

    if time_bound is not None:
        if not (math.isfinite(time_bound) and time_bound > 0.0):
            raise OptionsError(f"time bound must be a positive finite number, got {time_bound}")
        if kind == "muller":
            raise OptionsError("a time bound cannot be combined with Muller acceptance")
        if picked not in ("grid", "single_clock"):
            raise OptionsError(f"a time bound cannot be combined with method {picked!r}")
        if picked == "single_clock" and _normalize(method) == "single_clock":
            raise OptionsError(
                "a time bound adds a second clock; use the grid method (or auto)"
            )
        return check_time_bounded(c, a, time_bound, spec)

    if picked in ("single_clock", "grid", "muller_auto") and kind == "muller":
        engine = None if picked == "muller_auto" else picked
        return check_muller(
            c,
            a,
            engine=engine,
            eps=SINGLE_CLOCK_EPS if epsilon is None else epsilon,
            spec=spec,
        )
    if picked == "single_clock":
        if a.n_clocks != 1:
            raise OptionsError(
                f"the single-clock engine needs a one-clock automaton, got {a.n_clocks} clocks"
            )
        return solve_single_clock(c, a, eps=SINGLE_CLOCK_EPS if epsilon is None else epsilon)
    if picked == "grid":
        return solve_grid(c, a, spec)
    if picked == "simulate":
        timer = PhaseTimer()
        with timer.phase("simulate"):
            estimate = simulate_acceptance(
                c, a, SimConfig(n=samples, max_steps=max_steps, seed=seed, confidence=confidence)
            )
        warnings: tuple[str, ...] = ()
        if estimate.undecided:
            warnings = (
                f"{estimate.undecided} of {estimate.n} paths hit the step budget undecided; "
                f"the acceptance frequency lies in [{estimate.p_low:.6g}, {estimate.p_high:.6g}]",
            )
        return VerificationReport(
            probability=estimate.p_hat,
            method="simulate",
            acceptance=kind,
            confidence_interval=estimate.interval,
            confidence_level=estimate.confidence,
            statistics={
                "samples": float(estimate.n),
                "accepted": float(estimate.accepted),
                "rejected": float(estimate.rejected),
                "undecided": float(estimate.undecided),
                "half_width": estimate.half_width,
                "p_low": estimate.p_low,
                "p_high": estimate.p_high,
            },
            timings_ms=timer.timings_ms,
            warnings=warnings,
        )

    timer = PhaseTimer()
    with timer.phase("qualitative"):
        result = qualitative_check(c, a, mode)
    return VerificationReport(
        probability=None,
        method="qualitative",
        acceptance=kind,
        holds=result.holds,
        witness=result.witness,
        statistics={},
        timings_ms=timer.timings_ms,
    )
