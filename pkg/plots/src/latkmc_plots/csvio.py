"""Readers for the engine's CSV files (reproducibility header + data rows)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """The CSV does not carry the expected columns."""


@dataclass
class SeriesFile:
    path: Path
    metadata: dict
    columns: list[str]
    data: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def config(self) -> dict:
        raw = self.metadata.get("config")
        return json.loads(raw) if raw else {}


def read_series(path: str | Path) -> SeriesFile:
    """Parse one engine CSV: '#'-prefixed metadata, a header row, data rows."""
    path = Path(path)
    metadata: dict = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    metadata[key.strip()] = val.strip()
                continue
            if not columns:
                columns = line.split(",")
                continue
            if line:
                rows.append(line.split(","))
    if not columns:
        raise SchemaError(f"{path}: no header row found")
    if not metadata:
        warnings.warn(f"{path}: missing the engine metadata header")
    data: dict[str, np.ndarray] = {}
    for j, name in enumerate(columns):
        col = [r[j] for r in rows]
        if name in ("censored", "absorbed"):
            data[name] = np.array([c == "true" for c in col])
        elif name in ("replica", "direction", "sampler"):
            try:
                data[name] = np.array([int(c) for c in col])
            except ValueError:
                data[name] = np.array(col)
        else:
            data[name] = np.array([float(c) for c in col])
    return SeriesFile(path=path, metadata=metadata, columns=columns, data=data)


def require_columns(series: SeriesFile, needed: list[str]) -> None:
    for name in needed:
        if name not in series.columns:
            raise SchemaError(f"{series.path}: missing column {name!r} (have {series.columns})")


_PHYSICS_KEYS = ("n", "K", "J", "L", "h", "beta", "d0", "profile", "threshold")


def warn_on_config_mismatch(series: list[SeriesFile]) -> None:
    """Overlaid series should share the physical model (samplers may differ)."""
    if len(series) < 2:
        return
    ref = {k: series[0].config().get(k) for k in _PHYSICS_KEYS}
    for s in series[1:]:
        other = {k: s.config().get(k) for k in _PHYSICS_KEYS}
        if other != ref:
            diff = {k: (ref[k], other[k]) for k in _PHYSICS_KEYS if ref[k] != other[k]}
            warnings.warn(f"overlaid series differ in model parameters: {diff}")
