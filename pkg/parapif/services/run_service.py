from __future__ import annotations

import uuid
from pathlib import Path
from typing import List, Optional, Union

from ..cli import DEFAULT_RUNS_DIR, execute
from ..runs import RunRecord, RunRegistry
from ..schemas import RunConfig
from .run_queue import RunQueueWorker


class RunService:
    """Facade used by the HTTP layer: validate, queue and look up runs."""

    def __init__(
        self,
        registry: RunRegistry,
        runs_dir: Union[str, Path] = DEFAULT_RUNS_DIR,
        queue: Optional[RunQueueWorker] = None,
    ) -> None:
        self.registry = registry
        self.runs_dir = Path(runs_dir)
        self.queue = queue or RunQueueWorker(self._execute)

    def submit(self, config: RunConfig) -> RunRecord:
        """Cross-check ``config`` (ConfigurationError on failure) and queue it."""
        config.check_consistency()
        run_id = uuid.uuid4().hex[:12]
        record = self.registry.add(RunRecord(run_id, config, self.runs_dir / run_id))
        self.queue.schedule(record)
        return record

    def get(self, run_id: str) -> Optional[RunRecord]:
        return self.registry.get(run_id)

    def list_runs(self) -> List[RunRecord]:
        return self.registry.all()

    @staticmethod
    def _execute(record: RunRecord) -> int:
        return execute(record.config, record.output_dir)
