"""
Utility functions for pyxcal.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Iterable, List, Union

import numpy as np
import pandas as pd

#: Environment variable that selects the log level of the `pyxcal` logger.
LOG_ENV_VAR = "XCAL_LOG"

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

#: Format used for every real number written to CSV. 17 significant digits round-trip a double.
FLOAT_FORMAT = "%.17g"

logger = logging.getLogger("pyxcal")


def configure_logging(level: str = None) -> int:
    """
    Attach a single stderr handler to the `pyxcal` logger.
    The level comes from `level` or, when that is None, from the `XCAL_LOG` environment variable.
    Unknown values fall back to `warn`.
    """
    if level is None:
        level = os.environ.get(LOG_ENV_VAR, "warn")
    key = level.strip().lower()
    resolved = _LOG_LEVELS.get(key, logging.WARNING)
    logger.setLevel(resolved)
    if not any(getattr(h, "_pyxcal", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        handler._pyxcal = True
        logger.addHandler(handler)
    if key not in _LOG_LEVELS:
        logger.warning(f"unknown {LOG_ENV_VAR} value {level!r}, using warn")
    return resolved


def matrix_to_list(m: np.ndarray) -> List[float]:
    """Row-major flattening used by every JSON format."""
    return [float(x) for x in np.asarray(m, dtype=float).ravel(order="C")]


def list_to_matrix(values: Iterable[float], rows: int, cols: int) -> np.ndarray:
    arr = np.asarray(list(values), dtype=float)
    if arr.size != rows * cols:
        raise ValueError(f"expected {rows * cols} values for a {rows}x{cols} matrix, got {arr.size}")
    return arr.reshape(rows, cols)


def canonical_json(data: Any) -> str:
    """JSON with sorted keys and no whitespace, so that equal data hashes equally."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def content_hash(*parts: Union[str, bytes, Path]) -> str:
    """
    SHA-256 over strings, bytes and files. Directories are hashed file by file in sorted order,
    so the hash does not depend on the order the file system lists them.
    """
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, Path):
            files = sorted(p for p in part.rglob("*") if p.is_file()) if part.is_dir() else [part]
            for f in files:
                digest.update(str(f.relative_to(part) if part.is_dir() else f.name).encode())
                digest.update(f.read_bytes())
        elif isinstance(part, bytes):
            digest.update(part)
        else:
            digest.update(str(part).encode())
    return digest.hexdigest()


def write_csv(df: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_csv(path: Path) -> pd.DataFrame:
    """Read a CSV written by `write_csv`. Floats parse back to the exact doubles written."""
    return pd.read_csv(path, float_precision="round_trip")


def write_json(data: Any, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
