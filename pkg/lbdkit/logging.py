from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

LOGGER_NAME = "lbdkit"


class JsonlHandler(logging.Handler):
    def __init__(self, path: Path) -> None:
        super().__init__()
        self.path = path
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def emit(self, record: logging.LogRecord) -> None:
        payload: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        extra = getattr(record, "payload", None)
        if isinstance(extra, dict):
            payload.update(extra)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(payload, default=str, sort_keys=True) + "\n")


_LOGGER: Optional[logging.Logger] = None


def configure_logging(log_path: Optional[Path] = None, level: int = logging.INFO) -> logging.Logger:
    global _LOGGER
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()
    logger.propagate = False

    console = logging.StreamHandler()
    console.setLevel(level)
    console.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    logger.addHandler(console)

    if log_path:
        logger.addHandler(JsonlHandler(log_path))
    _LOGGER = logger
    return logger


def get_logger() -> logging.Logger:
    global _LOGGER
    if _LOGGER is None:
        _LOGGER = configure_logging()
    return _LOGGER


def log_event(
    logger: logging.Logger,
    message: str,
    payload: Optional[Dict[str, Any]] = None,
    level: int = logging.INFO,
) -> None:
    record = logger.makeRecord(
        logger.name,
        level,
        fn=__file__,
        lno=0,
        msg=message,
        args=(),
        exc_info=None,
    )
    record.payload = payload or {}
    logger.handle(record)


def log_warning(logger: logging.Logger, message: str, payload: Optional[Dict[str, Any]] = None) -> None:
    log_event(logger, message, payload, level=logging.WARNING)
