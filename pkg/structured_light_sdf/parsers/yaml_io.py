"""YAML helpers shared by the parsers"""

from pathlib import Path
from typing import Any, Dict

import yaml

from ..errors import ConfigError


def read_yaml(file_path: Path) -> Dict[str, Any]:
    """Load a YAML mapping; missing files and syntax errors become ConfigError"""
    file_path = Path(file_path)
    if not file_path.is_file():
        raise ConfigError(f"file not found: {file_path}")
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {file_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{file_path} must contain a mapping")
    return data


def require(data: Dict[str, Any], key: str, where: str) -> Any:
    if key not in data:
        raise ConfigError(f"{where}: missing required key '{key}'")
    return data[key]
