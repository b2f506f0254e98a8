"""Logging configuration."""

import logging
import sys
from types import TracebackType
from typing import Any

import structlog

from ..core.config import get_settings


def configure_logging(level: str | None = None, debug: bool = False) -> None:
    """Configure structured logging on stderr.

    ``level`` defaults to ``SEGMARKET_LOG``; ``debug`` forces DEBUG. Reports
    own stdout, so log lines never mix with JSON or CSV output.
    """
    name = "DEBUG" if debug else (level or get_settings().LOG)
    log_level = getattr(logging, name.upper(), logging.WARNING)

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=log_level,
        force=True,
    )

    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.JSONRenderer(),
    ]

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> Any:
    """Get a structured logger."""
    return structlog.get_logger(name)


class LogContext:
    """Bind command context to every event logged inside the block."""

    def __init__(self, **context: Any) -> None:
        self.context = context

    def __enter__(self) -> "LogContext":
        structlog.contextvars.bind_contextvars(**self.context)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        structlog.contextvars.unbind_contextvars(*self.context)
