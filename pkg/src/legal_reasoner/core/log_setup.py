"""Logging setup for the command-line entry point."""

import logging
import sys

from rich.console import Console
from rich.logging import RichHandler

PACKAGE_LOGGER = "legal_reasoner"


def configure_logging(level: str = "INFO") -> logging.Logger:
    """
    Route package logs to stderr through rich.

    Args:
        level: Log level name

    Returns:
        The package logger
    """
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    package_logger.setLevel(level.upper())

    # Clear any existing handlers to avoid duplicates on repeated CLI calls
    for handler in package_logger.handlers[:]:
        package_logger.removeHandler(handler)

    handler = RichHandler(
        console=Console(file=sys.stderr),
        show_path=False,
        rich_tracebacks=False,
        markup=False
    )
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s", datefmt="%H:%M:%S"))
    package_logger.addHandler(handler)
    package_logger.propagate = False
    return package_logger
