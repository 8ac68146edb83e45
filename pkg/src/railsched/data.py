"""Access to the bundled case-study instance and scenario documents."""

from __future__ import annotations

import json
from importlib import resources


def bundled_names() -> list:
    root = resources.files(__package__) / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    """Filesystem path of a bundled document (add .json automatically)."""
    fname = name if name.endswith(".json") else f"{name}.json"
    path = resources.files(__package__) / "data" / fname
    if not path.is_file():
        raise FileNotFoundError(f"no bundled document {name!r}; "
                                f"have {', '.join(bundled_names())}")
    return path


def load_bundled(name: str) -> dict:
    with bundled_path(name).open("r", encoding="utf-8") as fh:
        return json.load(fh)
