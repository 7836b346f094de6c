from __future__ import annotations

from typing import Any, Dict, Optional, Sequence, Tuple


class ParapifError(Exception):
    """Base class for every error raised by the package."""

    category = "internal"

    def details(self) -> Dict[str, Any]:
        return {}


class ArgumentError(ParapifError, ValueError):
    category = "argument"


class ConfigurationError(ParapifError, ValueError):
    """Inconsistent propagator, partition or run configuration."""

    category = "configuration"

    def __init__(self, message: str, keys: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.keys: Tuple[str, ...] = tuple(keys)

    def details(self) -> Dict[str, Any]:
        return {"keys": list(self.keys)}


class NumericError(ParapifError, ArithmeticError):
    category = "numeric"

    def __init__(self, message: str, module: Optional[str] = None) -> None:
        super().__init__(message)
        self.module = module

    def details(self) -> Dict[str, Any]:
        return {"module": self.module} if self.module else {}


class InsufficientDataError(NumericError):
    pass


class PropagationError(ParapifError):
    """A fine or coarse solve failed inside the parareal engine."""

    category = "numeric"

    def __init__(
        self,
        message: str,
        block: int,
        subdomain: int,
        propagator: str,
    ) -> None:
        super().__init__(
            f"{propagator} propagator failed in block {block}, subdomain {subdomain}: {message}"
        )
        self.block = block
        self.subdomain = subdomain
        self.propagator = propagator

    def details(self) -> Dict[str, Any]:
        return {
            "block": self.block,
            "subdomain": self.subdomain,
            "propagator": self.propagator,
        }
