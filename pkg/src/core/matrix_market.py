"""Matrix Market reader and writer for SpdMatrix and dense blocks.

Float data goes through ``scipy.io.mmwrite``/``mmread`` (array or coordinate
layout, 17 significant digits). Exact rational data uses the same header
layout with a ``rational`` field whose entries are written as ``num/den``.
"""

import logging
from fractions import Fraction
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.io
import scipy.sparse

from src.core.dense import SpdMatrix, as_block, to_fractions
from src.models.schemas import ScalarMode

logger = logging.getLogger(__name__)

Layout = Literal["array", "coordinate"]

_RATIONAL_HEADER = "%%MatrixMarket matrix {layout} rational {symmetry}"


def write_matrix(
    path: Path | str,
    data: SpdMatrix | np.ndarray,
    layout: Layout = "array",
    comment: str = "",
) -> Path:
    """Write a matrix or block. SpdMatrix is stored with symmetric storage."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    symmetric = isinstance(data, SpdMatrix)
    arr = data.entries if isinstance(data, SpdMatrix) else np.asarray(data)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)

    if arr.dtype == object:
        _write_rational(path, arr, layout, symmetric, comment)
    else:
        target = scipy.sparse.coo_matrix(arr) if layout == "coordinate" else np.asarray(arr)
        scipy.io.mmwrite(
            str(path),
            target,
            comment=comment,
            field="real",
            precision=17,
            symmetry="symmetric" if symmetric else "general",
        )
        # scipy appends the extension when it is missing
        if not path.exists() and path.with_suffix(".mtx").exists():
            path = path.with_suffix(".mtx")
    logger.debug(f"Wrote {arr.shape[0]}x{arr.shape[1]} {layout} matrix to {path}")
    return path


def _write_rational(path: Path, arr: np.ndarray, layout: Layout, symmetric: bool, comment: str) -> None:
    rows, cols = arr.shape
    lines = [_RATIONAL_HEADER.format(layout=layout, symmetry="symmetric" if symmetric else "general")]
    for line in comment.splitlines():
        lines.append(f"%{line}")

    def keep(i: int, j: int) -> bool:
        return not symmetric or i >= j

    if layout == "array":
        lines.append(f"{rows} {cols}")
        for j in range(cols):
            for i in range(rows):
                if keep(i, j):
                    lines.append(_fmt(arr[i, j]))
    else:
        entries = [
            (i, j) for j in range(cols) for i in range(rows) if keep(i, j) and arr[i, j] != 0
        ]
        lines.append(f"{rows} {cols} {len(entries)}")
        for i, j in entries:
            lines.append(f"{i + 1} {j + 1} {_fmt(arr[i, j])}")
    path.write_text("\n".join(lines) + "\n")


def _fmt(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def read_matrix(path: Path | str) -> np.ndarray:
    """Read a Matrix Market file into a dense float array or rational object array."""
    path = Path(path)
    with path.open() as f:
        header = f.readline()
    if " rational " in header:
        return _read_rational(path)
    data = scipy.io.mmread(str(path))
    if scipy.sparse.issparse(data):
        data = data.toarray()
    return np.asarray(data, dtype=np.float64)


def _read_rational(path: Path) -> np.ndarray:
    lines = path.read_text().splitlines()
    header = lines[0].split()
    layout, symmetry = header[2], header[4]
    body = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("%")]
    dims = body[0].split()
    rows, cols = int(dims[0]), int(dims[1])
    out = to_fractions(np.zeros((rows, cols), dtype=np.int64))
    symmetric = symmetry == "symmetric"

    if layout == "array":
        values = iter(body[1:])
        for j in range(cols):
            for i in range(rows):
                if symmetric and i < j:
                    continue
                out[i, j] = Fraction(next(values).strip())
    else:
        for ln in body[1:]:
            i_s, j_s, v_s = ln.split()
            out[int(i_s) - 1, int(j_s) - 1] = Fraction(v_s)

    if symmetric:
        for i in range(rows):
            for j in range(i + 1, cols):
                out[i, j] = out[j, i]
    return out


def read_spd(path: Path | str, spd_checks: int | None = None) -> SpdMatrix:
    """Read a Matrix Market file and validate it as an SpdMatrix."""
    arr = read_matrix(path)
    mode = ScalarMode.RATIONAL if arr.dtype == object else ScalarMode.FLOAT
    return SpdMatrix(arr, mode=mode, spd_checks=spd_checks)


def read_block(path: Path | str) -> np.ndarray:
    """Read a Matrix Market file as a column-major block."""
    return as_block(read_matrix(path))
