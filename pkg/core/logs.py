"""
Configuration du logging (loguru)
"""

import sys
from typing import Optional

from loguru import logger

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Configuration du système de logging"""

    # Suppression du logger par défaut
    logger.remove()

    logger.add(sys.stderr, format=LOG_FORMAT, level=level.upper(), colorize=True)

    if log_file:
        logger.add(
            log_file,
            format=LOG_FORMAT,
            level=level.upper(),
            rotation="10 MB",
            retention="7 days",
            compression="zip",
        )
