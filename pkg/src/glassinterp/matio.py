"""Plain-text matrix format.

First line holds ``n`` (square matrices) or ``n k`` (point sets, one point
per row); then one line per row of space-separated floats written with 17
significant digits, which round-trips float64 exactly.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DimensionMismatch


def format_matrix(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    rows, cols = M.shape
    header = f"{rows}" if rows == cols else f"{rows} {cols}"
    lines = [header] + [" ".join(f"{x:.17g}" for x in row) for row in M]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DimensionMismatch("empty matrix file")
    head = lines[0].split()
    rows = int(head[0])
    cols = int(head[1]) if len(head) > 1 else rows
    body = lines[1:]
    if len(body) != rows:
        raise DimensionMismatch(f"header says {rows} rows, found {len(body)}")
    values = [[float(tok) for tok in ln.split()] for ln in body]
    if any(len(row) != cols for row in values):
        raise DimensionMismatch(f"every row must have {cols} entries")
    M = np.array(values, dtype=np.float64).reshape(rows, cols)
    if M.shape != (rows, cols):
        raise DimensionMismatch(f"expected shape {(rows, cols)}, got {M.shape}")
    return M


def write_matrix(path, M) -> None:
    Path(path).write_text(format_matrix(M))


def read_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())
