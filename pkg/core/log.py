# core/log.py
import logging
import sys

import colorlog

_FORMAT = "%(log_color)s%(asctime)s %(levelname)-7s%(reset)s %(name)s: %(message)s"

_installed = False


def setup_logging(level: int = logging.INFO) -> None:
    """Install one colored stderr handler on the root logger (idempotent)."""
    global _installed
    root = logging.getLogger()
    root.setLevel(level)
    if _installed:
        return
    handler = colorlog.StreamHandler(sys.stderr)
    handler.setFormatter(
        colorlog.ColoredFormatter(
            _FORMAT,
            datefmt="%H:%M:%S",
            log_colors={
                "DEBUG": "cyan",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "bold_red",
            },
        )
    )
    root.addHandler(handler)
    _installed = True
