"""Result reporting shared by all verification engines."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator

METHODS = ("single_clock", "grid", "simulate", "qualitative")


@dataclass
class VerificationReport:
    """Outcome of one verification run.

    Parameters
    ----------
    probability : float or None
        Point value (exact and numerical engines) or estimate (simulation);
        ``None`` for purely qualitative verdicts.
    method : str
        One of ``single_clock``, ``grid``, ``simulate``, ``qualitative``.
    acceptance : str
        ``finite`` or ``muller``.
    error_bound : float or None
        Numerical error bound or final residual, when the engine provides
        one.
    confidence_interval : pair of float, optional
        Estimate bracket (simulation only).
    confidence_level : float, optional
        Nominal coverage of the confidence interval.
    holds : bool, optional
        Verdict of a qualitative query.
    witness : tuple of str or str, optional
        Certificate accompanying a qualitative verdict: an accepted path
        prefix for a positive answer, or the vertex violating almost-sure
        acceptance.
    statistics : dict
        Graph and run statistics (locations, vertices, subgraphs, samples,
        iterations, ...).
    timings_ms : dict
        Per-phase wall-clock milliseconds.
    warnings : tuple of str
        Validation and engine warnings.
    """

    probability: float | None
    method: str
    acceptance: str
    error_bound: float | None = None
    confidence_interval: tuple[float, float] | None = None
    confidence_level: float | None = None
    holds: bool | None = None
    witness: tuple[str, ...] | str | None = None
    statistics: dict[str, float] = field(default_factory=dict)
    timings_ms: dict[str, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if self.acceptance not in ("finite", "muller"):
            raise ValueError(f"unknown acceptance kind {self.acceptance!r}")
        if self.probability is not None and not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")

    def to_dict(self) -> dict:
        """Plain-JSON rendering of the report."""
        out: dict = {
            "probability": self.probability,
            "method": self.method,
            "acceptance": self.acceptance,
        }
        if self.error_bound is not None:
            out["error_bound"] = self.error_bound
        if self.confidence_interval is not None:
            out["confidence_interval"] = list(self.confidence_interval)
        if self.confidence_level is not None:
            out["confidence_level"] = self.confidence_level
        if self.holds is not None:
            out["holds"] = self.holds
        if self.witness is not None:
            witness = self.witness
            out["witness"] = list(witness) if isinstance(witness, tuple) else witness
        out["statistics"] = dict(self.statistics)
        out["timings_ms"] = {k: round(v, 3) for k, v in self.timings_ms.items()}
        out["warnings"] = list(self.warnings)
        return out


class PhaseTimer:
    """Collects per-phase wall-clock times in milliseconds."""

    def __init__(self) -> None:
        self.timings_ms: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = (time.perf_counter() - start) * 1000.0
            self.timings_ms[name] = self.timings_ms.get(name, 0.0) + elapsed
