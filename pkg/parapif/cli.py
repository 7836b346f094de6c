from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Union

from pydantic import ValidationError

from .commands import ModeRouter, RunContext
from .errors import ConfigurationError, NumericError, ParapifError, PropagationError
from .loader import load_config
from .repository import RunRepository
from .schemas import RunConfig

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "PARAPIF_LOG_LEVEL"
DEFAULT_RUNS_DIR = Path("runs")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def configure_logging(level: Optional[str] = None) -> None:
    name = (level or os.environ.get(LOG_LEVEL_ENV) or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ValidationError, ConfigurationError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericError, PropagationError)):
        return EXIT_NUMERIC
    return EXIT_INTERNAL


def error_category(exc: BaseException) -> str:
    if isinstance(exc, ValidationError):
        return "validation"
    if isinstance(exc, ParapifError):
        return exc.category
    return "internal"


def _validation_problems(exc: ValidationError) -> List[Dict[str, str]]:
    return [
        {"path": ".".join(str(part) for part in err["loc"]) or "<root>", "message": err["msg"]}
        for err in exc.errors()
    ]


def error_lines(exc: BaseException) -> List[str]:
    """Human-readable lines for stderr; ``path: message`` for schema problems."""
    if isinstance(exc, ValidationError):
        return [f"{p['path']}: {p['message']}" for p in _validation_problems(exc)]
    if isinstance(exc, ConfigurationError) and exc.keys:
        return [f"{key}: {exc}" for key in exc.keys]
    if isinstance(exc, ParapifError):
        context = ", ".join(f"{k}={v}" for k, v in exc.details().items())
        suffix = f" ({context})" if context else ""
        return [f"{exc.category} error: {exc}{suffix}"]
    return [f"internal error: {type(exc).__name__}: {exc}"]


def _details(exc: BaseException) -> Dict[str, Any]:
    if isinstance(exc, ValidationError):
        return {"errors": _validation_problems(exc)}
    if isinstance(exc, ParapifError):
        return exc.details()
    return {"type": type(exc).__name__}


def fail(exc: BaseException, repository: Optional[RunRepository], stream: Optional[TextIO] = None) -> int:
    if stream is None:
        stream = sys.stderr
    for line in error_lines(exc):
        print(line, file=stream)
    if repository is not None:
        repository.write_error(exc, error_category(exc), _details(exc))
    return exit_code_for(exc)


def execute(config: RunConfig, output_dir: Union[str, Path]) -> int:
    """Run one validated configuration into ``output_dir``; returns the exit code."""
    repository = RunRepository(output_dir)
    try:
        repository.ensure()
        ctx = RunContext(config, repository)
        result = ModeRouter().dispatch(ctx)
        repository.write_manifest(config.manifest_dict(), config.seed, ctx.warnings, result.summary)
    except Exception as exc:
        logger.debug("run failed", exc_info=True)
        return fail(exc, repository)
    logger.info("run finished; outputs in %s", repository.output_dir)
    return EXIT_OK


def execute_run(config_path: Union[str, Path], output_dir: Optional[Union[str, Path]] = None) -> int:
    target = Path(output_dir) if output_dir is not None else DEFAULT_RUNS_DIR / Path(config_path).stem
    try:
        config = load_config(config_path)
    except Exception as exc:
        return fail(exc, RunRepository(target))
    return execute(config, target)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parapif",
        description="Parareal particle-in-Fourier / particle-in-cell verification harness.",
    )
    parser.add_argument("--log-level", default=None, help=f"log level (default: ${LOG_LEVEL_ENV} or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a run configuration")
    run.add_argument("config", help="run configuration JSON, or a previous run's manifest.json")
    run.add_argument("--output-dir", default=None, help="output directory (default: runs/<config stem>)")

    sub.add_parser("schema", help="print the JSON Schema of run configurations")

    serve = sub.add_parser("serve", help="start the local run service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command == "schema":
        print(json.dumps(RunConfig.model_json_schema(), indent=2))
        return EXIT_OK
    if args.command == "serve":
        import uvicorn

        uvicorn.run("parapif.main:app", host=args.host, port=args.port)
        return EXIT_OK
    return execute_run(args.config, args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
