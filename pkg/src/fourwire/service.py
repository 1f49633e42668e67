"""HTTP service wrapping the solver: submit a network document, get a solution."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .errors import FourwireError, TerminalSetMismatch
from .io import (
    CompareReport,
    NetworkDocument,
    SolutionDocument,
    compare_solutions,
    settings_to_config,
    solution_to_document,
    to_network,
)
from .solver import solve_network

app = FastAPI(
    title="fourwire",
    description="Unbalanced multiconductor power flow via fixed-point current injection",
)


class SolveRequest(BaseModel):
    network: NetworkDocument


class CompareRequest(BaseModel):
    solution_a: SolutionDocument
    solution_b: SolutionDocument
    threshold: float = Field(default=1e-6, gt=0)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/solve", response_model=SolutionDocument)
def solve(request: SolveRequest) -> SolutionDocument:
    try:
        net, settings = to_network(request.network)
        solution = solve_network(net, settings_to_config(settings))
    except FourwireError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    return solution_to_document(solution)


@app.post("/compare", response_model=CompareReport)
def compare(request: CompareRequest) -> CompareReport:
    try:
        return compare_solutions(
            request.solution_a, request.solution_b, request.threshold
        )
    except TerminalSetMismatch as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
