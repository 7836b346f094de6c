from __future__ import annotations

from fastapi import APIRouter, HTTPException

from ..errors import ConfigurationError
from ..schemas import RunConfig, RunInfo, RunListResponse, RunSubmitted
from ..services.run_service import RunService


def create_http_router(service: RunService) -> APIRouter:
    router = APIRouter()

    @router.post("/api/runs", response_model=RunSubmitted, status_code=202)
    async def submit_run(config: RunConfig) -> RunSubmitted:
        try:
            record = service.submit(config)
        except ConfigurationError as exc:
            raise HTTPException(
                status_code=422,
                detail=[{"loc": key.split("."), "msg": str(exc)} for key in exc.keys] or str(exc),
            ) from exc
        return RunSubmitted(runId=record.run_id, status=record.status)

    @router.get("/api/runs", response_model=RunListResponse)
    async def list_runs() -> RunListResponse:
        return RunListResponse(runs=[r.info() for r in service.list_runs()])

    @router.get("/api/runs/{run_id}", response_model=RunInfo)
    async def get_run(run_id: str) -> RunInfo:
        record = service.get(run_id)
        if not record:
            raise HTTPException(status_code=404, detail="Run not found")
        return record.info()

    return router
