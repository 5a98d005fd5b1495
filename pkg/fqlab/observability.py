"""
Structured logging for fqlab.
Integrates structlog for JSON or console logging on stderr, so stdout stays
reserved for reports.
"""

import sys

import structlog

_LEVELS = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40, "CRITICAL": 50}


def configure_logging(json_format: bool = True, level: str = "WARNING"):
    """
    Configure structlog for structured logging.
    Call once at process startup (the CLI does this before dispatch).
    """
    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
    ]
    if json_format:
        processors.append(structlog.processors.JSONRenderer(sort_keys=True))
    else:
        processors.append(structlog.dev.ConsoleRenderer())

    structlog.configure(
        processors=processors,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        wrapper_class=structlog.make_filtering_bound_logger(_LEVELS.get(level.upper(), 30)),
        cache_logger_on_first_use=False,
    )


def bind_command(command: str, **context):
    """Attach command context to every log line emitted until the next call."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, **context)


logger = structlog.get_logger("fqlab")
