import logging
import sys
from pathlib import Path
from typing import Optional

# Configure logging format
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Create logger
logger = logging.getLogger("dcrb")
logger.setLevel(logging.INFO)

# Console handler (stderr; stdout carries result tables)
console_handler = logging.StreamHandler(sys.stderr)
console_handler.setLevel(logging.INFO)
console_formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)
console_handler.setFormatter(console_formatter)

# Add handlers to logger
logger.addHandler(console_handler)

# Prevent propagation to root logger
logger.propagate = False

_file_handler: Optional[logging.FileHandler] = None


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Apply the configured level and optionally attach a file handler"""
    global _file_handler

    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO

    logger.setLevel(numeric_level)
    console_handler.setLevel(numeric_level)

    if log_file and _file_handler is None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        _file_handler = logging.FileHandler(log_file)
        _file_handler.setLevel(numeric_level)
        _file_handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
        logger.addHandler(_file_handler)


def get_logger(name: str) -> logging.Logger:
    """Get a child of the dcrb logger; module names keep a single package prefix"""
    return logging.getLogger(f"dcrb.{name.removeprefix('dcrb.')}")
