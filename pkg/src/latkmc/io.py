"""Deterministic CSV/JSON emission with a reproducibility header.

Every CSV starts with '#'-prefixed metadata lines (config echo as one JSON
object, seed, version, git describe when available, timestamp) so any figure
built from it can be traced back to its exact run.  Floats are written with
17 significant digits, which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import json
import subprocess
from datetime import datetime, timezone
from pathlib import Path


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def metadata_lines(config_echo: dict, seed: int) -> list[str]:
    from . import __version__

    return [
        f"# latkmc {__version__}",
        f"# timestamp = {datetime.now(timezone.utc).isoformat()}",
        f"# git = {_git_describe()}",
        f"# seed = {seed}",
        "# config = " + json.dumps(config_echo, sort_keys=True),
    ]


def write_csv(path: str | Path, columns: list[str], rows, config_echo: dict, seed: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for line in metadata_lines(config_echo, seed):
            f.write(line + "\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(format_value(v) for v in row) + "\n")
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    return path


def _json_default(obj):
    import numpy as np

    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def read_csv(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """Read a CSV written by write_csv; returns (metadata, columns, raw rows)."""
    meta: dict = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val.strip()
                continue
            if not columns:
                columns = line.split(",")
                continue
            if line:
                rows.append(line.split(","))
    return meta, columns, rows
