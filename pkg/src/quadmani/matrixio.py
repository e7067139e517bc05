"""Binary persistence of dense snapshot matrices and training-mean centering.

Matrices are stored column-major because every downstream kernel consumes
snapshots one column at a time.

QMX1 layout (all little-endian)::

    bytes  0-7   b"QMXMAT1\\0"
    bytes  8-15  rows  (u64)
    bytes 16-23  cols  (u64)
    bytes 24-    rows*cols binary64 values, column-major
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MATRIX_MAGIC = b"QMXMAT1\x00"
_HEADER = struct.Struct("<8sQQ")
_U64_MAX = 2**64 - 1


class MatrixIOError(Exception):
    """Base class for snapshot-file errors; ``code`` identifies the failure."""

    code = "io"


class BadMagicError(MatrixIOError):
    code = "bad_magic"


class TruncatedError(MatrixIOError):
    code = "truncated"


class SizeOverflowError(MatrixIOError):
    code = "size_overflow"


class NonFiniteError(MatrixIOError):
    code = "non_finite"


class DimensionMismatchError(ValueError):
    pass


def as_data_matrix(values) -> np.ndarray:
    """Validate and return ``values`` as a 2-D float64 array with finite entries."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"data matrix must be 2-D with positive dims, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("data matrix contains non-finite values")
    return a


def write_matrix(m, path) -> None:
    a = as_data_matrix(m)
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, rows, cols))
        fh.write(np.asarray(a, dtype="<f8").tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedError(f"{path}: header shorter than {_HEADER.size} bytes")
    magic, rows, cols = _HEADER.unpack_from(data, 0)
    if magic != MATRIX_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if rows < 1 or cols < 1:
        raise TruncatedError(f"{path}: empty matrix {rows}x{cols}")
    if rows * cols > _U64_MAX // 8:
        raise SizeOverflowError(f"{path}: rows*cols overflows ({rows}x{cols})")
    nbytes = rows * cols * 8
    if len(data) - _HEADER.size < nbytes:
        raise TruncatedError(f"{path}: payload has {len(data) - _HEADER.size} bytes, expected {nbytes}")
    values = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=_HEADER.size)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{path}: non-finite value in payload")
    return values.astype(np.float64).reshape((rows, cols), order="F")


@dataclass(frozen=True, eq=False)
class CenteringShift:
    """Row-wise mean of a training matrix, reused for validation and test data."""

    mean: np.ndarray

    def __len__(self) -> int:
        return self.mean.shape[0]


def center_columns(train) -> tuple[np.ndarray, CenteringShift]:
    a = as_data_matrix(train)
    mean = a.mean(axis=1)
    return a - mean[:, None], CenteringShift(mean)


def apply_shift(m, shift: CenteringShift) -> np.ndarray:
    a = as_data_matrix(m)
    if a.shape[0] != len(shift):
        raise DimensionMismatchError(f"shift has length {len(shift)}, matrix has {a.shape[0]} rows")
    return a - shift.mean[:, None]


def zero_shift(n: int) -> CenteringShift:
    return CenteringShift(np.zeros(n))


def write_csv(path, header: Sequence[str] | None, rows: Iterable[Sequence]) -> None:
    """Write a report table: UTF-8, ',' separator, '.' decimal, one row per line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
