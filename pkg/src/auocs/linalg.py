"""Dense vector/matrix kernels, norms, and the shared matrix text format.

Vectors and matrices are plain ``float64`` numpy arrays. The ``as_vec`` and
``as_mat`` constructors are the validation boundary: they reject non-finite
entries and wrong ranks so downstream code can assume clean data.
"""

from __future__ import annotations

import io
import os
from typing import Iterable, TextIO

import numpy as np

__all__ = [
    "DimensionError",
    "ParseError",
    "as_vec",
    "as_mat",
    "norm1",
    "norm2",
    "norm_inf",
    "mat_inf_norm",
    "matvec",
    "matvec_t",
    "spectral_norm_estimate",
    "format_array",
    "parse_array",
    "write_array",
    "read_array",
]


class DimensionError(ValueError):
    """Raised on empty operands or mismatched shapes."""


class ParseError(ValueError):
    """Raised on malformed matrix text; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


def _check_finite(arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite entries are not allowed")
    return arr


def as_vec(values) -> np.ndarray:
    """Return ``values`` as a 1-D finite float64 array (copied when needed)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {arr.shape}")
    return _check_finite(arr)


def as_mat(values) -> np.ndarray:
    """Return ``values`` as a 2-D finite float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {arr.shape}")
    return _check_finite(arr)


def _nonempty(v: np.ndarray) -> np.ndarray:
    if v.size == 0:
        raise DimensionError("empty operand")
    return v


def norm1(v) -> float:
    """Sum of absolute values."""
    v = _nonempty(as_vec(v))
    return float(np.sum(np.abs(v)))


def norm2(v) -> float:
    """Euclidean norm."""
    v = _nonempty(as_vec(v))
    return float(np.sqrt(np.dot(v, v)))


def norm_inf(v) -> float:
    v = _nonempty(as_vec(v))
    return float(np.max(np.abs(v)))


def mat_inf_norm(m) -> float:
    """Induced infinity norm: the largest row absolute sum.

    This is the same quantity as the largest row l1 norm, which is what the
    matrix-uncertainty bound needs.
    """
    m = as_mat(m)
    if m.size == 0:
        raise DimensionError("empty matrix")
    return float(np.max(np.sum(np.abs(m), axis=1)))


def matvec(m, v) -> np.ndarray:
    m, v = as_mat(m), as_vec(v)
    if m.shape[1] != v.shape[0]:
        raise DimensionError(f"cannot multiply {m.shape} by vector of length {v.shape[0]}")
    return m @ v


def matvec_t(m, v) -> np.ndarray:
    m, v = as_mat(m), as_vec(v)
    if m.shape[0] != v.shape[0]:
        raise DimensionError(f"cannot multiply transpose of {m.shape} by vector of length {v.shape[0]}")
    return m.T @ v


def spectral_norm_estimate(m, iters: int = 100, seed: int = 0) -> float:
    """Estimate the largest singular value of ``m`` by power iteration on ``m.T @ m``.

    The start vector is drawn from a PCG64 stream seeded with ``seed`` so the
    estimate is reproducible.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    m = as_mat(m)
    if m.size == 0:
        raise DimensionError("empty matrix")
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(m.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        w = m.T @ (m @ x)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        x = w / nw
        sigma = float(np.linalg.norm(m @ x))
    return sigma


# -- text format -----------------------------------------------------------
#
# "# <rows> <cols>" then one whitespace-separated row per line. '%.17g'
# round-trips every float64 exactly.


def format_array(arr) -> str:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    lines = [f"# {arr.shape[0]} {arr.shape[1]}"]
    for row in arr:
        lines.append(" ".join("%.17g" % x for x in row))
    return "\n".join(lines) + "\n"


def parse_array(lines: Iterable[str], first_lineno: int = 1, vector: bool | None = None) -> np.ndarray:
    """Parse one array block from ``lines``.

    ``lines`` must start at the ``#`` header. Exactly ``rows`` data lines are
    consumed; anything after them is ignored. Returns a 1-D array for
    single-column data when ``vector`` is true (or None and cols == 1).
    """
    it = iter(lines)
    lineno = first_lineno
    try:
        header = next(it)
    except StopIteration:
        raise ParseError("missing '# rows cols' header", lineno) from None
    parts = header.split()
    if len(parts) != 3 or parts[0] != "#":
        raise ParseError(f"bad header {header.strip()!r}", lineno)
    try:
        rows, cols = int(parts[1]), int(parts[2])
    except ValueError:
        raise ParseError(f"bad dimensions in header {header.strip()!r}", lineno) from None
    if rows < 0 or cols < 0:
        raise ParseError("negative dimensions", lineno)
    out = np.empty((rows, cols), dtype=np.float64)
    for r in range(rows):
        lineno += 1
        try:
            line = next(it)
        except StopIteration:
            raise ParseError(f"truncated: expected {rows} rows, got {r}", lineno) from None
        fields = line.split()
        if len(fields) != cols:
            raise ParseError(f"expected {cols} values, got {len(fields)}", lineno)
        try:
            out[r] = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric value in {line.strip()!r}", lineno) from None
    if not np.all(np.isfinite(out)):
        raise ParseError("non-finite value", lineno)
    if vector or (vector is None and cols == 1):
        if cols != 1:
            raise ParseError(f"expected a column vector, got {cols} columns", first_lineno)
        return out[:, 0]
    return out


def write_array(path: str | os.PathLike | TextIO, arr) -> None:
    text = format_array(arr)
    if isinstance(path, io.TextIOBase):
        path.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def read_array(path: str | os.PathLike, vector: bool | None = None) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    return parse_array(lines, vector=vector)
