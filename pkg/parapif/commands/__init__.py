from .base import ModeHandler, ModeResult, RunContext
from .router import ModeRouter

__all__ = ["ModeHandler", "ModeResult", "ModeRouter", "RunContext"]
