from __future__ import annotations

import os
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .api.http import create_http_router
from .cli import DEFAULT_RUNS_DIR
from .runs import RunRegistry
from .services.run_service import RunService

RUNS_DIR_ENV = "PARAPIF_RUNS_DIR"


def create_app(runs_dir: Optional[Union[str, Path]] = None) -> FastAPI:
    app = FastAPI(title="parapif run service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    target = runs_dir or os.environ.get(RUNS_DIR_ENV) or DEFAULT_RUNS_DIR
    service = RunService(RunRegistry(), target)
    app.state.run_service = service
    app.include_router(create_http_router(service))
    return app


app = create_app()
