"""On-disk formats: CKD1 dense matrices, CKS1 sparse matrices, and CSV helpers.

CKD1 layout (little-endian):
    bytes 0-3   ASCII magic "CKD1"
    bytes 4-7   u32 version = 1
    bytes 8-15  u64 row count
    bytes 16-23 u64 column count
    then rows*cols IEEE-754 binary64 values, row-major.

CKS1 layout (little-endian):
    magic "CKS1", u32 version = 1, u64 size, u64 nnz,
    then nnz triplets (u64 row, u64 col, f64 value) sorted by (row, col).
    Symmetric matrices store both (i, j) and (j, i).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sparse

_DENSE_MAGIC = b"CKD1"
_SPARSE_MAGIC = b"CKS1"
_TRIPLET_DTYPE = np.dtype([("row", "<u8"), ("col", "<u8"), ("value", "<f8")])


def write_dense(path, array) -> None:
    array = np.ascontiguousarray(array, dtype=np.float64)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise ValueError(f"CKD1 stores 2-d matrices, got ndim={array.ndim}")
    rows, cols = array.shape
    with open(path, "wb") as fh:
        fh.write(_DENSE_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(array.astype("<f8", copy=False).tobytes(order="C"))


def read_dense(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DENSE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {_DENSE_MAGIC!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != 1:
            raise ValueError(f"{path}: unsupported CKD1 version {version}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
        if data.size != rows * cols:
            raise ValueError(f"{path}: truncated payload, expected {rows * cols} values, got {data.size}")
    return data.reshape(rows, cols).astype(np.float64)


def write_sparse(path, matrix) -> None:
    coo = sparse.coo_matrix(matrix)
    if coo.shape[0] != coo.shape[1]:
        raise ValueError(f"CKS1 stores square matrices, got shape {coo.shape}")
    order = np.lexsort((coo.col, coo.row))
    triplets = np.empty(coo.nnz, dtype=_TRIPLET_DTYPE)
    triplets["row"] = coo.row[order]
    triplets["col"] = coo.col[order]
    triplets["value"] = coo.data[order]
    with open(path, "wb") as fh:
        fh.write(_SPARSE_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<QQ", coo.shape[0], coo.nnz))
        fh.write(triplets.tobytes())


def read_sparse(path) -> sparse.csr_matrix:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SPARSE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {_SPARSE_MAGIC!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != 1:
            raise ValueError(f"{path}: unsupported CKS1 version {version}")
        size, nnz = struct.unpack("<QQ", fh.read(16))
        triplets = np.frombuffer(fh.read(nnz * _TRIPLET_DTYPE.itemsize), dtype=_TRIPLET_DTYPE)
        if triplets.size != nnz:
            raise ValueError(f"{path}: truncated payload, expected {nnz} triplets, got {triplets.size}")
    mat = sparse.coo_matrix(
        (triplets["value"].astype(np.float64),
         (triplets["row"].astype(np.int64), triplets["col"].astype(np.int64))),
        shape=(size, size),
    ).tocsr()
    mat.sort_indices()
    return mat


def read_csv_samples(path, header: bool = False) -> np.ndarray:
    """Load one sample per row from a comma-separated file."""
    data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    return np.asarray(data, dtype=np.float64)


def write_csv_columns(path, columns: dict) -> None:
    """Write named float columns as CSV with a header row, '%.17g' formatting."""
    names = list(columns)
    arrays = [np.asarray(columns[name], dtype=np.float64) for name in names]
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValueError("all columns must have equal length")
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(length):
            fh.write(",".join("%.17g" % a[i] for a in arrays) + "\n")
