import logging
import os
import pathlib
from typing import Any

from dotenv import load_dotenv

from transientpy.io.export import dumps

PACKAGE_LOGGER = "transientpy"
RUN_LOGGER = "transientpy.run"
LOG_LEVEL_ENV = "TRANSIENTPY_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(RUN_LOGGER)


def load_environment(dotenv_path: str | pathlib.Path | None = None) -> None:
    """Load a `.env` file without overriding variables that are already set."""
    load_dotenv(dotenv_path=dotenv_path, override=False)


def default_log_level() -> int:
    """Console log level from TRANSIENTPY_LOG_LEVEL, WARNING when unset or invalid."""
    name = os.getenv(LOG_LEVEL_ENV, "WARNING").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING


def configure_logging(
    verbosity: int = 0, run_log: str | pathlib.Path | None = None
) -> logging.Logger:
    """
    Attach console (and optionally file) handlers to the package logger.

    Handlers installed by an earlier call are replaced, so repeated CLI invocations
    in one process do not duplicate output.

    Args:
        verbosity (int): 0 uses the environment default, 1 INFO, 2 or more DEBUG.
        run_log (str | pathlib.Path | None): File that receives every INFO record,
            including the resolved run configuration.

    Returns:
        logging.Logger: The package logger.
    """
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = default_log_level()

    package_logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(package_logger.handlers):
        if getattr(handler, "_transientpy", False):
            package_logger.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(formatter)
    handler._transientpy = True  # type: ignore[attr-defined]
    package_logger.addHandler(handler)

    logger_level = level
    if run_log is not None:
        file_handler = logging.FileHandler(run_log, mode="w", encoding="utf-8")
        file_handler.setLevel(min(level, logging.INFO))
        file_handler.setFormatter(formatter)
        file_handler._transientpy = True  # type: ignore[attr-defined]
        package_logger.addHandler(file_handler)
        logger_level = min(level, logging.INFO)

    package_logger.setLevel(logger_level)
    return package_logger


def config_record(command: str, **sections: Any) -> str:
    """Single-line JSON describing the fully resolved configuration of a command."""
    return dumps({"command": command, **sections}, indent=None)


def log_run_config(command: str, **sections: Any) -> str:
    """Log the resolved configuration of a command to the run log and return it."""
    record = config_record(command, **sections)
    logger.info(f"run config {record}")
    return record
