"""Writer for the engine's FEA1 feature file format.

Layout (little-endian, no padding or footer): 4-byte magic ``FEA1``,
uint32 frame count, uint32 width, then frame-major float32 values. This is
an independent implementation of the documented format; the engine's own
reader is the conformance check in the tests.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"FEA1"


def write_fea(matrix: np.ndarray, path) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError("refusing to write non-finite feature values")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())
