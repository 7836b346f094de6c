from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from .schemas import RunConfig, RunInfo


@dataclass
class RunRecord:
    run_id: str
    config: RunConfig
    output_dir: Path
    status: str = "queued"
    exit_code: Optional[int] = None
    error_category: Optional[str] = None
    error_message: Optional[str] = None

    def info(self) -> RunInfo:
        return RunInfo(
            runId=self.run_id,
            mode=self.config.mode,
            status=self.status,
            outputDir=str(self.output_dir),
            exitCode=self.exit_code,
            errorCategory=self.error_category,
            errorMessage=self.error_message,
        )


class RunRegistry:
    """Submitted runs of this process, in submission order."""

    def __init__(self) -> None:
        self._by_id: Dict[str, RunRecord] = {}

    def add(self, record: RunRecord) -> RunRecord:
        self._by_id[record.run_id] = record
        return record

    def get(self, run_id: str) -> Optional[RunRecord]:
        return self._by_id.get(run_id)

    def all(self) -> List[RunRecord]:
        return list(self._by_id.values())
