"""Logging configuration for the PRISM subgroup-identification system."""

import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, Optional, Union

import colorlog

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)-20s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

STAGE_LOGGERS = [
    "Stages.Supervisor.pipeline_supervisor",
    "Stages.workers.filter_enet",
    "Stages.workers.ple_forest",
    "Stages.workers.submod_trees",
    "Stages.workers.param_infer",
    "Stages.workers.bootstrap_resampling",
    "simulation",
    "report",
    "shared",
]

# Raised to WARNING by quiet_stage_loggers; study progress stays visible.
QUIET_LOGGERS = [name for name in STAGE_LOGGERS if name.startswith("Stages")] + [
    "simulation.generator",
    "simulation.oracle",
]


def setup_logging(log_level: Optional[str] = None, stage_log_level: str = "INFO") -> None:
    """Setup centralized console logging; stage modules log at ``stage_log_level``."""

    if log_level is None:
        log_level = os.getenv("LOG_LEVEL", "INFO")

    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(colorlog.ColoredFormatter(
        "%(log_color)s%(asctime)s | %(levelname)-8s%(reset)s | %(blue)s%(name)-20s%(reset)s | %(message)s",
        datefmt=DATE_FORMAT,
        log_colors={
            "DEBUG": "cyan",
            "INFO": "green",
            "WARNING": "yellow",
            "ERROR": "red",
            "CRITICAL": "purple",
        },
        no_color=not sys.stdout.isatty(),
    ))

    root_logger = logging.getLogger()
    for existing in list(root_logger.handlers):
        if getattr(existing, "_prism_console", False):
            root_logger.removeHandler(existing)
    handler._prism_console = True
    root_logger.addHandler(handler)
    root_logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))

    configure_stage_loggers(stage_log_level)
    configure_external_loggers()


def configure_stage_loggers(stage_level: str = "INFO") -> None:
    """Configure logging for pipeline stage modules."""
    for logger_name in STAGE_LOGGERS:
        logger = logging.getLogger(logger_name)
        logger.setLevel(getattr(logging, stage_level.upper(), logging.INFO))


def configure_external_loggers() -> None:
    """Configure logging levels for external libraries."""
    external_loggers = {
        "numexpr": logging.WARNING,
        "sklearn": logging.WARNING,
        "statsmodels": logging.WARNING,
        "asyncio": logging.WARNING,
    }

    for logger_name, level in external_loggers.items():
        logging.getLogger(logger_name).setLevel(level)


def add_file_logging(path: Union[str, Path], log_level: int = logging.DEBUG) -> logging.Handler:
    """
    Add a plain-text file handler to the root logger.

    Args:
        path: Log file to write (parent directories are created)
        log_level: Minimum level written to the file

    Returns:
        The handler instance, for ``remove_file_logging``
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setLevel(log_level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    logging.getLogger().addHandler(handler)
    return handler


def remove_file_logging(handler: logging.Handler) -> None:
    logging.getLogger().removeHandler(handler)
    handler.close()


@contextmanager
def quiet_stage_loggers(level: int = logging.WARNING) -> Iterator[Dict[str, int]]:
    """
    Raise stage loggers to ``level`` while a parallel study or bootstrap runs.

    Replicate workers log their own stage chatter; without this the console
    interleaves hundreds of per-stage lines. Original levels are restored on exit.
    """
    original_levels = {}
    for logger_name in QUIET_LOGGERS:
        logger_obj = logging.getLogger(logger_name)
        original_levels[logger_name] = logger_obj.level
        logger_obj.setLevel(max(level, logger_obj.getEffectiveLevel()))
    try:
        yield original_levels
    finally:
        for logger_name, level_value in original_levels.items():
            logging.getLogger(logger_name).setLevel(level_value)
