"""Delimited text I/O for datasets, predictions and reports.

Files carry a header row; floats are written with 17 significant digits so
a save/load cycle reproduces every value exactly. The bias column is never
written: it is appended again on load.
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bhme.core.errors import DataError
from bhme.models.hme import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schema:
    name: str
    input_columns: tuple[str, ...]
    target_columns: tuple[str, ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return self.input_columns + self.target_columns


SCHEMAS = {
    "toy": Schema("toy", ("x",), ("t",)),
    "arm": Schema("arm", ("x1", "x2"), ("theta1", "theta2")),
    # Delve kin-8nm: eight joint angles, one distance target
    "kin8nm": Schema("kin8nm", tuple(f"theta{k}" for k in range(1, 9)), ("y",)),
}


def format_float(value: float) -> str:
    if math.isnan(value):
        return "nan"
    return f"{value:.17g}"


def _is_numeric_row(row: Sequence[str]) -> bool:
    try:
        [float(cell) for cell in row]
    except ValueError:
        return False
    return True


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return line.split()
    return [cell.strip() for cell in next(csv.reader([line], delimiter=delimiter))]


def load_table(
    path: str | Path,
    delimiter: str | None = ",",
    default_header: Sequence[str] | None = None,
) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a numeric table; returns (column names, N x K array).

    ``delimiter=None`` splits on whitespace. A file whose first row is
    numeric has no header and takes ``default_header``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"File not found: {path}")
    header: tuple[str, ...] | None = None
    rows: list[list[float]] = []
    with path.open(newline="") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            cells = _split(line, delimiter)
            if header is None and not rows:
                if _is_numeric_row(cells):
                    if default_header is None:
                        raise DataError(f"{path}: missing header row")
                    header = tuple(default_header)
                else:
                    header = tuple(cells)
                    continue
            if len(cells) != len(header):
                raise DataError(
                    f"{path}:{line_number}: expected {len(header)} fields, "
                    f"got {len(cells)}"
                )
            try:
                rows.append([float(cell) for cell in cells])
            except ValueError as exc:
                raise DataError(f"{path}:{line_number}: {exc}") from exc
    if header is None:
        raise DataError(f"{path}: empty file")
    values = np.array(rows, dtype=float).reshape(len(rows), len(header))
    logger.debug("Loaded %d rows x %d columns from %s", *values.shape, path)
    return header, values


def select_columns(
    header: Sequence[str], values: np.ndarray, columns: Sequence[str], path=None
) -> np.ndarray:
    missing = [name for name in columns if name not in header]
    if missing:
        raise DataError(f"{path or 'table'}: missing columns {', '.join(missing)}")
    return values[:, [list(header).index(name) for name in columns]]


def load_delimited(
    path: str | Path,
    schema: Schema | str,
    delimiter: str | None = ",",
    augment: bool = True,
) -> Dataset:
    """Load a dataset whose columns follow ``schema`` (a :class:`Schema` or name)."""
    if isinstance(schema, str):
        if schema not in SCHEMAS:
            raise DataError(f"Unknown schema {schema!r}")
        schema = SCHEMAS[schema]
    header, values = load_table(path, delimiter, default_header=schema.columns)
    return Dataset.from_arrays(
        select_columns(header, values, schema.input_columns, path),
        select_columns(header, values, schema.target_columns, path),
        input_columns=schema.input_columns,
        target_columns=schema.target_columns,
        augment=augment,
    )


def infer_schema(path: str | Path, num_targets: int = 1) -> Schema:
    """Schema from a header row, taking the last ``num_targets`` columns as targets."""
    header, _ = load_table(path)
    if not 0 < num_targets < len(header):
        raise DataError(f"{path}: cannot take {num_targets} targets from {header}")
    return Schema(Path(path).stem, header[:-num_targets], header[-num_targets:])


def write_rows(
    path: str | Path, header: Sequence[str], rows: Iterable[Sequence]
) -> None:
    """Write a CSV with a header; floats use 17 significant digits."""

    def cell(value) -> str:
        if isinstance(value, (float, np.floating)):
            return format_float(float(value))
        if isinstance(value, (bool, np.bool_)):
            return "true" if value else "false"
        return str(value)

    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell(value) for value in row])


def save_delimited(dataset: Dataset, path: str | Path) -> None:
    """Write raw inputs then targets, one row per point, without the bias column."""
    header = dataset.raw_input_columns + dataset.target_columns
    values = np.hstack([dataset.raw_inputs, dataset.targets])
    write_rows(path, header, values.tolist())
