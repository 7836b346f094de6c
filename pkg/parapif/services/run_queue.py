from __future__ import annotations

import asyncio
import json
import logging
from typing import Callable, Optional

from ..runs import RunRecord

logger = logging.getLogger(__name__)

RunExecutor = Callable[[RunRecord], int]


class RunQueueWorker:
    """Background task that executes submitted runs one at a time off the event loop."""

    def __init__(self, executor: RunExecutor) -> None:
        self.executor = executor
        self._queue: asyncio.Queue[RunRecord] = asyncio.Queue()
        self._task: Optional[asyncio.Task[None]] = None

    def schedule(self, record: RunRecord) -> None:
        try:
            loop = asyncio.get_running_loop()
        except RuntimeError:
            # No event loop (scripts, tests): run in place.
            self._execute(record)
            return

        self._queue.put_nowait(record)
        if not self._task or self._task.done():
            self._task = loop.create_task(self._drain_queue())

    async def join(self) -> None:
        await self._queue.join()

    async def _drain_queue(self) -> None:
        while not self._queue.empty():
            record = await self._queue.get()
            try:
                await asyncio.to_thread(self._execute, record)
            finally:
                self._queue.task_done()

    def _execute(self, record: RunRecord) -> None:
        record.status = "running"
        logger.info("run %s started (%s)", record.run_id, record.config.mode)
        try:
            code = self.executor(record)
        except Exception as exc:
            logger.exception("run %s crashed", record.run_id)
            record.status = "failed"
            record.exit_code = 1
            record.error_category = "internal"
            record.error_message = str(exc)
            return
        record.exit_code = code
        if code == 0:
            record.status = "succeeded"
        else:
            record.status = "failed"
            _read_error(record)
        logger.info("run %s %s (exit %d)", record.run_id, record.status, code)


def _read_error(record: RunRecord) -> None:
    path = record.output_dir / "error.json"
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError):
        return
    record.error_category = payload.get("category")
    record.error_message = payload.get("message")
