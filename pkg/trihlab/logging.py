"""Logging utilities for trihlab.

All records go to stderr through the ``trihlab`` logger; stdout is reserved
for the JSON lines the CLI prints.
"""
from __future__ import annotations

import logging
import sys
from typing import Optional

PACKAGE_LOGGER = "trihlab"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logging(level: int | str | None = None) -> None:
    """Attach the stderr handler once; later calls only change the level."""

    logger = logging.getLogger(PACKAGE_LOGGER)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False
    if level is not None:
        logger.setLevel(level)
    elif logger.level == logging.NOTSET:
        logger.setLevel(logging.INFO)


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Return a logger below ``trihlab``, ensuring the handler is attached."""

    setup_logging()
    if not name or name == "__main__":
        return logging.getLogger(PACKAGE_LOGGER)
    return logging.getLogger(name)
