from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from .errors import ConfigurationError
from .schemas import RunConfig

logger = logging.getLogger(__name__)


class ConfigLoader:
    """Load a run configuration, or the configuration recorded in a run manifest."""

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)

    def read_raw(self) -> Dict[str, Any]:
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file {self.path} does not exist") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"{self.path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
            ) from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{self.path} must hold a JSON object")
        if "config" in data and "mode" not in data:
            logger.info("reading configuration recorded in manifest %s", self.path)
            data = data["config"]
        return data

    def load(self) -> RunConfig:
        """Validate and cross-check; pydantic.ValidationError or ConfigurationError on failure."""
        config = RunConfig.model_validate(self.read_raw())
        config.check_consistency()
        return config


def load_config(path: Union[str, Path]) -> RunConfig:
    return ConfigLoader(path).load()
