"""On-disk formats for fields and sweep tables.

Binary field files carry a magic line, a little-endian u64 header
(dimension, points per axis, field count), then each field's float64
samples in row-major order.  CSV tables print every float with 17
significant digits, so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, FieldFormatError
from .torus import Grid, make_grid

__all__ = ["MAGIC", "write_fields", "read_fields", "write_table", "read_table"]

MAGIC = b"MFGLAB-FIELD-V1\n"
_HEADER = struct.Struct("<3Q")


def write_fields(
    path: Union[str, Path], grid: Grid, fields: Sequence[np.ndarray]
) -> None:
    if len(fields) == 0:
        raise ConfigurationError("refusing to write a field file with no fields")
    arrays = []
    for i, f in enumerate(fields):
        arr = np.ascontiguousarray(np.asarray(f, dtype="<f8"))
        if arr.shape != grid.shape:
            raise ConfigurationError(
                f"field {i} has shape {arr.shape}, expected {grid.shape}"
            )
        arrays.append(arr)
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(_HEADER.pack(grid.d, grid.n, len(arrays)))
        for arr in arrays:
            handle.write(arr.tobytes())


def read_fields(path: Union[str, Path]) -> Tuple[Grid, List[np.ndarray]]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise FieldFormatError(f"{path}: missing the field-file magic header")
    offset = len(MAGIC)
    if len(data) < offset + _HEADER.size:
        raise FieldFormatError(
            f"{path}: truncated header, expected at least "
            f"{offset + _HEADER.size} bytes, found {len(data)}"
        )
    d, n, count = _HEADER.unpack_from(data, offset)
    try:
        grid = make_grid(int(d), int(n))
    except ConfigurationError as err:
        raise FieldFormatError(f"{path}: invalid grid in header ({err})") from err
    if count == 0:
        raise FieldFormatError(f"{path}: header declares zero fields")
    offset += _HEADER.size
    expected = offset + count * grid.size * 8
    if len(data) < expected:
        raise FieldFormatError(
            f"{path}: truncated payload, expected {expected} bytes, found "
            f"{len(data)} ({expected - len(data)} missing)"
        )
    if len(data) > expected:
        raise FieldFormatError(
            f"{path}: {len(data) - expected} trailing bytes after the payload"
        )
    flat = np.frombuffer(data, dtype="<f8", count=count * grid.size, offset=offset)
    stacked = flat.reshape((count,) + grid.shape)
    return grid, [np.array(stacked[i], dtype=np.float64) for i in range(count)]


def _format_cell(value) -> str:
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def write_table(
    path: Union[str, Path],
    header: Sequence[str],
    rows: Sequence[Sequence],
) -> None:
    width = len(header)
    if width == 0:
        raise ConfigurationError("table header must not be empty")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i, row in enumerate(rows):
            if len(row) != width:
                raise ConfigurationError(
                    f"row {i} has {len(row)} cells, header has {width}"
                )
            writer.writerow([_format_cell(cell) for cell in row])


def read_table(path: Union[str, Path]) -> Tuple[List[str], List[List[float]]]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FieldFormatError(f"{path}: empty table") from None
        rows = []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise FieldFormatError(
                    f"{path}: row {i} has {len(row)} cells, header has {len(header)}"
                )
            rows.append([float(cell) for cell in row])
    return header, rows
