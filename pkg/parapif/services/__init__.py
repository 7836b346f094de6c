from .run_queue import RunQueueWorker
from .run_service import RunService

__all__ = ["RunQueueWorker", "RunService"]
