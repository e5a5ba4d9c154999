"""HTTP facade over the runner functions.

Every endpoint takes the same RunConfig tree the CLI reads from disk,
plus the per-command options, and returns exactly the payload the CLI
would serialize.  Error mapping: invalid configs are 422 (either from
request validation or from geometry checks at assembly time), a solve
that hits the iteration cap is 500 with code "solver_not_converged",
and a Wood-critical configuration without allow_wood is 409.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import runner
from .basiscmp import DEFAULT_PROXY_RADIUS
from .config import FORMAT_VERSION, FieldSliceSpec, RunConfig
from .runner import WoodCriticalError
from .solver import GmresNotConverged


class SolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    allow_wood: bool = False
    grid: int = Field(96, gt=1)
    deterministic: bool = False


class FieldRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    slice: FieldSliceSpec = FieldSliceSpec()
    allow_wood: bool = False


class ScanRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    param: str
    values: List[float]
    grid: int = Field(64, gt=1)
    allow_wood: bool = False


class OneBodyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    refine: float = Field(1.25, ge=0.0)
    far_point: Tuple[float, float, float] = (10.0, 10.0, 10.0)


class CompareRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    p_values: List[int]
    n2_values: List[int]
    radius: float = Field(DEFAULT_PROXY_RADIUS, gt=0)
    probe: Tuple[float, float, float] = (0.9, 0.9, 0.9)
    allow_wood: bool = False


class WoodRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    margin: float = Field(1e-3, gt=0)


def create_app() -> FastAPI:
    app = FastAPI(title="axiscat", version=FORMAT_VERSION)

    @app.exception_handler(WoodCriticalError)
    async def _wood(request, exc):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=409, content={"detail": {
            "code": "wood_critical",
            "message": str(exc),
            "orders": [list(o) for o in exc.report.orders],
        }})

    @app.exception_handler(GmresNotConverged)
    async def _stalled(request, exc):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=500, content={"detail": {
            "code": "solver_not_converged",
            "message": str(exc),
        }})

    @app.exception_handler(ValueError)
    async def _bad_config(request, exc):
        # geometry/targeting checks that only fire once arrays meet each
        # other (obstacle vs cell size, basis vs mode cutoff, ...)
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=422, content={"detail": {
            "code": "invalid_config",
            "message": str(exc),
        }})

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "format_version": FORMAT_VERSION}

    @app.post("/v1/solve")
    def solve(req: SolveRequest):
        return runner.run_solve(req.config, allow_wood=req.allow_wood,
                                grid=req.grid,
                                deterministic=req.deterministic)

    @app.post("/v1/field")
    def field(req: FieldRequest):
        names, rows = runner.run_field(req.config, req.slice,
                                       allow_wood=req.allow_wood)
        return {"format_version": FORMAT_VERSION, "command": "field",
                "config": req.config.model_dump(exclude_none=True),
                "fieldnames": names, "rows": rows}

    @app.post("/v1/scan")
    def scan(req: ScanRequest):
        rows = runner.run_scan(req.config, req.param, req.values,
                               grid=req.grid, allow_wood=req.allow_wood)
        return {"format_version": FORMAT_VERSION, "command": "scan",
                "config": req.config.model_dump(exclude_none=True),
                "fieldnames": runner.SCAN_FIELDS, "rows": rows}

    @app.post("/v1/onebody")
    def onebody(req: OneBodyRequest):
        return runner.run_onebody(req.config, refine=req.refine,
                                  far_point=req.far_point)

    @app.post("/v1/compare-basis")
    def compare(req: CompareRequest):
        rows, notes = runner.run_compare(
            req.config, req.p_values, req.n2_values, radius=req.radius,
            probe=req.probe, allow_wood=req.allow_wood)
        return {"format_version": FORMAT_VERSION, "command": "compare-basis",
                "config": req.config.model_dump(exclude_none=True),
                "fieldnames": runner.COMPARE_FIELDS, "rows": rows,
                "notes": notes}

    @app.post("/v1/wood")
    def wood(req: WoodRequest):
        return runner.run_wood(req.config, margin=req.margin)

    return app


app = create_app()
