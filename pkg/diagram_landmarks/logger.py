"""
Logging for batch runs: JSON records to a rotating file, plain lines to stderr.
"""
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional, TextIO

from pythonjsonlogger import jsonlogger

from diagram_landmarks.config import RunConfig

JSON_FIELDS = '%(asctime)s %(name)s %(levelname)s %(message)s'
CONSOLE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
MAX_LOG_BYTES = 10 * 1024 * 1024
BACKUP_COUNT = 5

# chatty below WARNING during fold fan-out
QUIET_LOGGERS = ("joblib", "sklearn")


def _resolve_level(name: str) -> int:
    level = logging.getLevelName(name.upper())
    if not isinstance(level, int):
        raise ValueError(f"Invalid log level: {name}")
    return level


def _json_file_handler(path: str) -> RotatingFileHandler:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(path, maxBytes=MAX_LOG_BYTES, backupCount=BACKUP_COUNT,
                                  encoding="utf-8")
    handler.setFormatter(jsonlogger.JsonFormatter(JSON_FIELDS, datefmt='%Y-%m-%d %H:%M:%S'))
    return handler


def setup_logging(config: RunConfig, stream: Optional[TextIO] = None) -> logging.Logger:
    """
    Setup run logging.

    An empty log_file disables the file sink. Nothing is written to stdout.

    Args:
        config: Run configuration
        stream: Console stream (default: stderr)

    Returns:
        logging.Logger: The configured root logger

    Raises:
        ValueError: If the log level is invalid
    """
    log_level = _resolve_level(config.log_level)

    root_logger = logging.getLogger()
    for handler in root_logger.handlers:
        handler.close()
    root_logger.handlers = []
    root_logger.setLevel(log_level)

    if config.log_file:
        root_logger.addHandler(_json_file_handler(config.log_file))

    console_handler = logging.StreamHandler(stream or sys.stderr)
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    root_logger.addHandler(console_handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(log_level, logging.WARNING))

    root_logger.debug("Logging configured with level %s (file: %s)",
                      config.log_level, config.log_file or "none")
    return root_logger
