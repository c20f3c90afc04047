"""Dense matrix files shared by the retrieval and loss commands.

Text form: a header line with ``N`` (square) or ``rows cols``, then one row of
whitespace-separated floats per line. Binary form: ``CKMX``, two little-endian
uint32 (rows, cols), then row-major little-endian float32.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DimensionMismatch

MATRIX_MAGIC = b"CKMX"


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data.startswith(MATRIX_MAGIC):
        rows, cols = struct.unpack_from("<II", data, 4)
        body = np.frombuffer(data, dtype="<f4", offset=12)
        if body.size != rows * cols:
            raise DimensionMismatch(f"header says {rows}x{cols}, file holds {body.size} values")
        return body.astype(np.float64).reshape(rows, cols)
    lines = [ln.split() for ln in data.decode("utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DimensionMismatch("empty matrix file")
    header = [int(t) for t in lines[0]]
    if len(header) == 1:
        rows = cols = header[0]
    elif len(header) == 2:
        rows, cols = header
    else:
        raise DimensionMismatch("matrix header must hold N or 'rows cols'")
    body = lines[1:]
    if len(body) != rows or any(len(r) != cols for r in body):
        raise DimensionMismatch(f"expected {rows} rows of {cols} values")
    return np.array([[float(t) for t in r] for r in body], dtype=np.float64).reshape(rows, cols)


def write_matrix(m, path, binary: bool = False) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    rows, cols = m.shape
    if binary:
        with open(path, "wb") as f:
            f.write(MATRIX_MAGIC + struct.pack("<II", rows, cols))
            f.write(m.astype("<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{rows}\n" if rows == cols else f"{rows} {cols}\n")
        for row in m:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")
