from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError

from backend.data_schema.models import Config

logger = logging.getLogger(__name__)

OUT_DIR_ENV = "FDKP_OUT_DIR"


class ConfigError(ValueError):
    """Configuration could not be parsed or violates an invariant; ``key`` names the culprit."""

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message)
        self.key = key


class ConfigIngestion:
    """Parses flat JSON run configurations, applies defaults and environment overrides."""

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def load(self, path: Optional[str | Path]) -> Config:
        """Full ingestion: read, check shape, apply environment, validate."""
        raw = self.read(path) if path is not None else {}
        self.check_flat(raw)
        raw = self.apply_environment(raw)
        return self.validate(raw)

    def read(self, path: str | Path) -> dict[str, Any]:
        path = Path(path)
        try:
            text = path.read_text()
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        try:
            raw = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return raw

    def check_flat(self, raw: dict[str, Any]) -> None:
        for key, value in raw.items():
            if isinstance(value, dict):
                raise ConfigError(f"{key}: nested objects are not allowed", key=key)

    def apply_environment(self, raw: dict[str, Any]) -> dict[str, Any]:
        out_dir = os.environ.get(OUT_DIR_ENV)
        if out_dir:
            logger.debug("output directory overridden by %s=%s", OUT_DIR_ENV, out_dir)
            return {**raw, "out_dir": out_dir}
        return raw

    def validate(self, raw: dict[str, Any]) -> Config:
        try:
            return Config(**raw)
        except ValidationError as exc:
            first = exc.errors()[0]
            key = ".".join(str(part) for part in first["loc"])
            msg = first["msg"]
            if first["type"] == "extra_forbidden":
                msg = "unknown key"
            if not key:
                # model-level failures carry the key at the front of the message
                key = msg.split(":", 1)[0].removeprefix("Value error, ")
            raise ConfigError(f"{key}: {msg}", key=key) from None


_ingestion = ConfigIngestion()


def load_config(path: Optional[str | Path] = None) -> Config:
    """Load a flat JSON config; absent keys take defaults, unknown keys are errors."""
    return _ingestion.load(path)
