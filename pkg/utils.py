import logging
import math
import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv

CONFIG_KEYS = {"k", "levels", "problem", "out", "format", "mesh", "solver", "extended"}


def get_log_level():
    load_dotenv()
    # Get the logging level from environment variable, default to INFO if not set
    log_level_str = os.getenv("LOG_LEVEL", "INFO").upper()

    log_level_map = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }

    return log_level_map.get(log_level_str, logging.INFO)


def load_config_file(path: str) -> Dict[str, str]:
    """
    Read a plain key=value study configuration.

    :param path: Path to the configuration file
    :return: Mapping of recognised keys to their raw string values
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ValueError(f"Config file not found: {path}")

    values: Dict[str, str] = {}
    with open(config_path, "r", encoding="utf-8") as f:
        for line_number, raw_line in enumerate(f, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_number}: expected key=value, got '{raw_line.strip()}'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{line_number}: unknown config key '{key}'")
            values[key] = value

    logging.debug(f"Loaded config {path}: {values}")
    return values


def observed_order(previous_error: Optional[float], error: float) -> Optional[float]:
    """log2 of the ratio of consecutive errors under uniform halving of h."""
    if previous_error is None or previous_error <= 0.0 or error <= 0.0:
        return None
    return math.log2(previous_error / error)


def format_error(value: Optional[float]) -> str:
    # 4 significant digits
    return "" if value is None else f"{value:.3e}"


def format_order(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.3f}"
