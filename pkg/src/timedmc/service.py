"""HTTP verification service.

A thin FastAPI wrapper around :func:`timedmc.verify.verify`: requests carry
the CTMC and DTA documents inline (same JSON schemas as the files the CLI
reads) plus engine options, responses carry the verification report.  Usage
errors map to 400, model validation errors to 422, and solver
non-convergence to 409.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from .formats import FormatError, ctmc_from_dict, dta_from_dict
from .grid import ConvergenceError
from .verify import OptionsError, verify

__all__ = ["app", "VerifyRequest", "VerifyResponse"]


class StateModel(BaseModel):
    id: str
    labels: list[str] = []
    rate: float


class TransitionModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: str = Field(alias="from")
    to: str
    prob: float


class CtmcModel(BaseModel):
    states: list[StateModel]
    initial: str
    transitions: list[TransitionModel] = []


class GuardAtomModel(BaseModel):
    clock: str
    op: str
    const: int


class AcceptanceModel(BaseModel):
    kind: str
    locations: list[str] | None = None
    family: list[list[str]] | None = None


class EdgeModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: str = Field(alias="from")
    symbol: list[str]
    guard: list[GuardAtomModel] = []
    resets: list[str] = []
    to: str


class DtaModel(BaseModel):
    clocks: list[str]
    locations: list[str]
    initial: str
    acceptance: AcceptanceModel
    edges: list[EdgeModel] = []


class VerifyRequest(BaseModel):
    ctmc: CtmcModel
    dta: DtaModel
    method: str = "auto"
    qualitative: str | None = None
    acceptance: str | None = None
    time_bound: float | None = None
    grid_step: float = 0.01
    epsilon: float | None = None
    max_sweeps: int | None = None
    samples: int = 100_000
    seed: int = 0
    max_steps: int = 10_000
    confidence: float = 0.99


class VerifyResponse(BaseModel):
    probability: float | None = None
    method: str
    acceptance: str
    error_bound: float | None = None
    confidence_interval: list[float] | None = None
    confidence_level: float | None = None
    holds: bool | None = None
    witness: list[str] | str | None = None
    statistics: dict[str, float] = {}
    timings_ms: dict[str, float] = {}
    warnings: list[str] = []


app = FastAPI(
    title="timedmc",
    description="Probability that a CTMC's timed paths are accepted by a "
    "deterministic timed automaton.",
)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/verify", response_model=VerifyResponse, response_model_exclude_none=True)
def verify_endpoint(request: VerifyRequest) -> VerifyResponse:
    try:
        c = ctmc_from_dict(request.ctmc.model_dump(by_alias=True), source="request.ctmc")
        a = dta_from_dict(
            request.dta.model_dump(by_alias=True, exclude_none=True), source="request.dta"
        )
    except FormatError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    try:
        report = verify(
            c,
            a,
            method=request.method,
            qualitative=request.qualitative,
            acceptance=request.acceptance,
            time_bound=request.time_bound,
            grid_step=request.grid_step,
            epsilon=request.epsilon,
            max_sweeps=request.max_sweeps,
            samples=request.samples,
            seed=request.seed,
            max_steps=request.max_steps,
            confidence=request.confidence,
        )
    except OptionsError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except ConvergenceError as exc:
        raise HTTPException(
            status_code=409,
            detail=f"did not converge: residual {exc.residual:g} after {exc.iterations} sweeps",
        ) from exc
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return VerifyResponse(**report.to_dict())
