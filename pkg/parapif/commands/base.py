from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Protocol

from ..repository import RunRepository
from ..schemas import RunConfig

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    config: RunConfig
    repository: RunRepository
    warnings: List[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)


@dataclass
class ModeResult:
    summary: Dict[str, Any] = field(default_factory=dict)


class ModeHandler(Protocol):
    def __call__(self, ctx: RunContext) -> ModeResult: ...
