"""
Logging configuration and utilities.
"""

import logging
from typing import Optional


def setup_logging(debug_mode: bool = False, log_file: Optional[str] = None,
                  level: Optional[str] = None):
    """
    Setup logging configuration.

    Args:
        debug_mode: Force DEBUG level on the console.
        log_file: Optional path; everything at DEBUG is also written there.
        level: Console level name from the configuration (ignored in debug mode).
    """
    if debug_mode:
        log_level = logging.DEBUG
    elif level:
        log_level = getattr(logging, level.upper(), logging.INFO)
    else:
        log_level = logging.INFO

    console_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )

    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG if log_file else log_level)

    # Re-running setup (tests, repeated CLI calls) must not stack handlers
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(file_formatter)
        root_logger.addHandler(file_handler)

    # Reduce noise from some libraries
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    logging.getLogger('PIL').setLevel(logging.WARNING)
