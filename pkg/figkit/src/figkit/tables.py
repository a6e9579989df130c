"""CSV contract for analysis-bundle inputs.

Cells are kept as the raw strings from the file; parsing to float happens
per column on demand so errors can name the offending column and row, and
dump-back can rewrite the table without reformatting a single cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FigureInputError(ValueError):
    """Any malformed or missing figure input."""


@dataclass(frozen=True)
class Table:
    path: Path
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise FigureInputError(
                f"{self.path}: missing column {column!r} "
                f"(found {', '.join(self.columns)})") from None

    def strings(self, column: str) -> list[str]:
        i = self.index(column)
        return [row[i] for row in self.rows]

    def floats(self, column: str) -> np.ndarray:
        i = self.index(column)
        out = np.empty(len(self.rows))
        for r, row in enumerate(self.rows):
            try:
                out[r] = float(row[i])
            except ValueError:
                raise FigureInputError(
                    f"{self.path}: column {column!r} row {r + 1} is not "
                    f"a number: {row[i]!r}") from None
        return out

    def matrix(self) -> tuple[tuple[str, ...], np.ndarray]:
        """Read a labeled square matrix: first column row labels, rest values.

        Row labels must repeat the header labels in order, so the table is
        guaranteed to describe one symmetric-indexed matrix.
        """
        labels = self.columns[1:]
        if len(self.rows) != len(labels):
            raise FigureInputError(
                f"{self.path}: matrix must be square, got {len(self.rows)} "
                f"rows for {len(labels)} labeled columns")
        names = tuple(row[0] for row in self.rows)
        if names != labels:
            raise FigureInputError(
                f"{self.path}: row labels {names} do not match column "
                f"labels {labels}")
        values = np.vstack([self.floats(c) for c in labels]).T
        if not np.isfinite(values).all():
            raise FigureInputError(f"{self.path}: matrix has non-finite cells")
        return labels, values

    def write(self, path: Path | str) -> None:
        """Re-emit the table exactly as read (dump-back)."""
        lines = [",".join(self.columns)]
        lines.extend(",".join(row) for row in self.rows)
        Path(path).write_text("\n".join(lines) + "\n")


def read_table(path: Path | str, required: tuple[str, ...] = ()) -> Table:
    path = Path(path)
    if not path.exists():
        raise FigureInputError(f"missing input CSV: {path}")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].strip():
        raise FigureInputError(f"{path}: empty file (no header)")
    columns = tuple(lines[0].split(","))
    rows = []
    for n, ln in enumerate(lines[1:], start=2):
        if not ln:
            continue
        cells = tuple(ln.split(","))
        if len(cells) != len(columns):
            raise FigureInputError(
                f"{path}: line {n} has {len(cells)} cells, "
                f"expected {len(columns)}")
        rows.append(cells)
    if not rows:
        raise FigureInputError(f"{path}: no data rows")
    table = Table(path=path, columns=columns, rows=tuple(rows))
    for column in required:
        table.index(column)
    return table
