"""Strict text readers and writers for observation matrices and chart output."""
from __future__ import annotations

import csv
import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .monitoring import ChartPoint

# Plain decimal or scientific notation; no locale separators, no nan/inf.
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class DataError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def parse_number(cell: str) -> float:
    text = cell.strip()
    if not _NUMBER.fullmatch(text):
        raise ValueError(f"not a finite decimal number: {cell!r}")
    return float(text)


def _looks_numeric(cells: Sequence[str]) -> bool:
    return all(_NUMBER.fullmatch(c.strip()) for c in cells)


def read_matrix_csv(path: str | Path, header: bool = False) -> tuple[np.ndarray, list[str] | None]:
    """Read a numeric CSV (rows = observations). Returns ``(matrix, column_names)``.

    Blank lines are skipped. Ragged rows, non-numeric cells, NaN and infinity
    raise :class:`DataError` naming the offending line.
    """
    rows: list[list[float]] = []
    names: list[str] | None = None
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if header and names is None:
                if _looks_numeric(cells):
                    raise DataError("expected a header row but found numbers (drop --header?)", path, lineno)
                names = [c.strip() for c in cells]
                width = len(names)
                continue
            if width is None:
                width = len(cells)
            if len(cells) != width:
                raise DataError(f"expected {width} fields, found {len(cells)}", path, lineno)
            try:
                rows.append([parse_number(c) for c in cells])
            except ValueError as exc:
                hint = " (is this a header? use --header)" if not rows and not header else ""
                raise DataError(f"{exc}{hint}", path, lineno) from None
    if not rows:
        raise DataError("no data rows", path)
    return np.asarray(rows, dtype=float), names


def write_matrix_csv(path: str | Path, matrix, columns: Sequence[str] | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if columns is not None:
            w.writerow(columns)
        for row in np.asarray(matrix, dtype=float):
            w.writerow([format(v, ".17g") for v in row])


def read_pgm_p2(path: str | Path) -> np.ndarray:
    """Read a plain-text (P2) PGM image as a ``rows x cols`` float matrix."""
    tokens: list[tuple[str, int]] = []
    with open(path, encoding="ascii", errors="strict") as fh:
        for lineno, line in enumerate(fh, start=1):
            for tok in line.split("#", 1)[0].split():
                tokens.append((tok, lineno))
    if not tokens or tokens[0][0] != "P2":
        raise DataError("not a plain PGM file (magic 'P2' missing)", path, tokens[0][1] if tokens else None)
    try:
        width, height, maxval = (int(t) for t, _ in tokens[1:4])
    except ValueError:
        raise DataError("bad PGM header", path, tokens[min(3, len(tokens) - 1)][1]) from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise DataError("bad PGM dimensions", path, tokens[1][1])
    pix = tokens[4:]
    if len(pix) != width * height:
        raise DataError(f"expected {width * height} pixel values, found {len(pix)}", path)
    out = np.empty(width * height)
    for i, (tok, lineno) in enumerate(pix):
        if not tok.isdigit() or int(tok) > maxval:
            raise DataError(f"bad pixel value {tok!r}", path, lineno)
        out[i] = int(tok)
    return out.reshape(height, width)


def write_pgm_p2(path: str | Path, image, maxval: int = 255) -> None:
    """Write a matrix as a P2 PGM, rounding and clipping to ``0..maxval``."""
    img = np.clip(np.rint(np.asarray(image, dtype=float)), 0, maxval).astype(int)
    h, w = img.shape
    lines = ["P2", f"{w} {h}", str(maxval)]
    lines += [" ".join(str(v) for v in row) for row in img]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_image(path: str | Path) -> np.ndarray:
    """PGM (P2) when the file starts with the P2 magic, otherwise a header-less CSV matrix."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P2":
        return read_pgm_p2(path)
    return read_matrix_csv(path, header=False)[0]


def write_chart_csv(
    path: str | Path,
    points: Sequence[ChartPoint],
    r0: float,
    first_alarm: int | None,
    contributions: bool = False,
) -> None:
    """Chart rows ``t,R,R0,alarm,post_alarm[,c1..cp]``.

    ``post_alarm`` flags rows after the first alarm, so a run can be split
    into its monitored and post-alarm parts.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["t", "R", "R0", "alarm", "post_alarm"]
        if contributions and points:
            head += [f"c{j + 1}" for j in range(points[0].contributions.shape[0])]
        w.writerow(head)
        for pt in points:
            row = [pt.t, format(pt.r, ".10g"), format(r0, ".10g"), int(pt.alarm),
                   int(first_alarm is not None and pt.t > first_alarm)]
            if contributions:
                row += [format(c, ".6g") for c in pt.contributions]
            w.writerow(row)


def write_t2q_csv(path: str | Path, rows: Sequence[tuple[int, float, float, bool]], t2_limit: float, q_limit: float) -> None:
    """Benchmark chart rows ``t,T2,Q,T2_limit,Q_limit,alarm``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "T2", "Q", "T2_limit", "Q_limit", "alarm"])
        for t, t2, q, alarm in rows:
            w.writerow([t, format(t2, ".10g"), format(q, ".10g"), format(t2_limit, ".10g"),
                        format(q_limit, ".10g"), int(alarm)])
