"""CSV reading and writing for masked matrices.

Missing cells are empty, ``NA`` or ``NaN`` (any case). By default rows
are coordinates and columns are time points; ``transpose=True`` reads
files laid out the other way round.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional, TextIO, Union

import numpy as np

from .data import MaskedMatrix, build_masked

MISSING_TOKENS = frozenset({"", "na", "nan"})

PathOrFile = Union[str, Path, TextIO]


class CsvFormatError(ValueError):
    pass


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _open(src: PathOrFile, mode: str):
    if isinstance(src, (str, Path)):
        return open(src, mode, newline="")
    return None


def read_csv(
    src: PathOrFile,
    transpose: bool = False,
    header: Optional[bool] = None,
    index_col: bool = False,
) -> MaskedMatrix:
    """Read a CSV file into a :class:`MaskedMatrix`.

    Parameters
    ----------
    src : path or text file
    transpose : bool
        File rows are time points and columns are coordinates.
    header : bool, optional
        Whether the first line holds labels. ``None`` detects it: the first
        line is a header when some cell is neither missing nor numeric.
    index_col : bool
        The first column holds labels rather than data.

    Labels along the time axis end up in ``labels``, those along the
    coordinate axis in ``row_labels``.
    """
    fh = _open(src, "r")
    try:
        lines = [(i + 1, row) for i, row in enumerate(csv.reader(fh or src)) if row]
    finally:
        if fh is not None:
            fh.close()
    if not lines:
        raise CsvFormatError("empty CSV input")

    width = len(lines[0][1])
    for lineno, row in lines:
        if len(row) != width:
            raise CsvFormatError(
                f"line {lineno}: expected {width} fields, found {len(row)} (ragged rows)"
            )

    first = lines[0][1][1:] if index_col else lines[0][1]
    if header is None:
        header = any(not _is_missing(c) and not _is_number(c) for c in first)
    head = None
    if header:
        head = [c.strip() for c in first]
        lines = lines[1:]

    index = []
    values = np.zeros((len(lines), width - int(index_col)))
    mask = np.zeros(values.shape, dtype=np.int8)
    for r, (lineno, row) in enumerate(lines):
        if index_col:
            index.append(row[0].strip())
            row = row[1:]
        for c, cell in enumerate(row):
            if _is_missing(cell):
                continue
            try:
                x = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"line {lineno}, field {c + 1 + int(index_col)}: cannot parse {cell!r} as a number"
                ) from None
            if not math.isfinite(x):
                raise CsvFormatError(f"line {lineno}, field {c + 1 + int(index_col)}: non-finite value {cell!r}")
            values[r, c] = x
            mask[r, c] = 1

    col_labels = tuple(head) if head is not None else None
    line_labels = tuple(index) if index_col else None
    if transpose:
        values, mask = values.T, mask.T
        time_labels, coord_labels = line_labels, col_labels
    else:
        time_labels, coord_labels = col_labels, line_labels
    if values.shape[0] < 1:
        raise CsvFormatError("no data rows")
    if values.shape[1] < 2:
        raise CsvFormatError(f"need at least 2 time points, found {values.shape[1]}")
    return build_masked(values, mask, labels=time_labels, row_labels=coord_labels)


def format_number(x: float) -> str:
    # repr is the shortest string that round-trips to the same double
    return repr(float(x))


def write_csv(m: MaskedMatrix, dst: PathOrFile, header: Optional[bool] = None) -> None:
    """Write ``m`` with coordinates as rows; missing cells become ``NA``.

    A header line is written when ``m`` has time labels (or ``header=True``,
    in which case missing labels are numbered ``1..n``). Row labels, if
    present, go in a leading column.
    """
    fh = _open(dst, "w")
    out = fh or dst
    try:
        writer = csv.writer(out, lineterminator="\n")
        if header is None:
            header = m.labels is not None
        lead = [""] if m.row_labels is not None else []
        if header:
            labels = m.labels if m.labels is not None else tuple(str(t) for t in range(1, m.n + 1))
            writer.writerow(lead + [str(x) for x in labels])
        for j in range(m.p):
            cells = [
                format_number(v) if o else "NA" for v, o in zip(m.values[j].tolist(), m.mask[j].tolist())
            ]
            writer.writerow(([str(m.row_labels[j])] if m.row_labels is not None else []) + cells)
    finally:
        if fh is not None:
            fh.close()
