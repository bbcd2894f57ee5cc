"""
helpers.py

Small helper utilities shared by the simulator modules:
- get_named_paths: lightweight project path resolver
- load_structured_file: YAML/JSON loader used by presets and run configs
- open_text: text reader/writer that handles `.gz` transparently
- parse_int: integer parsing for hex/decimal config values

This file contains no simulation logic.
"""

from __future__ import annotations

import gzip
import os
from typing import IO, Any, Dict

import yaml

from core.errors import ConfigError


def get_named_paths(current_file: str, max_levels: int = 3) -> Dict[str, str]:
    """
    Generate incrementally higher-level project paths relative to the calling file.

    Parameters
    ----------
    current_file : str
        Typically passed as __file__ from the calling module.
    max_levels : int, optional
        Number of directory levels to traverse upwards, by default 3.

    Returns
    -------
    dict
        A mapping:
            "level_up_0": directory of current_file
            "level_up_1": 1 directory above
            ...
            "level_up_n": n directories above
    """
    base_dir = os.path.abspath(os.path.dirname(current_file))
    return {
        f"level_up_{i}": os.path.abspath(os.path.join(base_dir, *([".."] * i)))
        for i in range(max_levels + 1)
    }


PROJECT_PATH = get_named_paths(__file__)["level_up_1"]
CONFIG_DIR = os.path.join(PROJECT_PATH, "apps", "config")


def load_structured_file(path: str) -> Any:
    """
    Load a YAML or JSON document.

    JSON is read through the YAML loader as well, so one code path serves
    both formats.

    Raises
    ------
    ConfigError
        If the file is missing or does not parse.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f)
    except FileNotFoundError as exc:
        raise ConfigError(path, "file not found") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(path, f"could not parse ({exc})") from exc


def open_text(path: str, mode: str = "r") -> IO[str]:
    """Open a UTF-8 text file, gzip-compressed when the name ends in `.gz`."""
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")  # type: ignore[return-value]
    return open(path, mode, encoding="utf-8", newline="\n" if "w" in mode else None)


def parse_int(value: Any, key: str) -> int:
    """
    Parse an integer config value. Strings may be hex (`0x...`) and may
    contain `_` separators; booleans are rejected.
    """
    if isinstance(value, bool):
        raise ConfigError(key, "expected an integer, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value.strip(), 0)
        except ValueError as exc:
            raise ConfigError(key, f"not an integer: {value!r}") from exc
    raise ConfigError(key, f"expected an integer, got {type(value).__name__}")
