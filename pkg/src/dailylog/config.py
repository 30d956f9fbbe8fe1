"""Config file loading (JSON, or TOML by file extension)."""

from __future__ import annotations

import json
from pathlib import Path


def load_config_file(path) -> dict:
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(path.read_text(encoding="utf-8"))
    return json.loads(path.read_text(encoding="utf-8"))
