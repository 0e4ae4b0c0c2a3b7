"""CSV dataset IO and the built-in toy generators.

The on-disk format is a plain UTF-8 CSV whose header declares the input
and target widths: ``x0,...,x{k-1},y0,...,y{m-1}``. Every row holds
decimal floats; targets may be one-hot class indicators or real vectors.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import Array


class DatasetFormatError(ValueError):
    """Malformed dataset file; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _parse_header(header: list[str]) -> tuple[int, int]:
    n_x = 0
    while n_x < len(header) and header[n_x] == f"x{n_x}":
        n_x += 1
    n_y = len(header) - n_x
    expected = [f"x{i}" for i in range(n_x)] + [f"y{i}" for i in range(n_y)]
    if n_x == 0 or n_y == 0 or header != expected:
        raise DatasetFormatError(
            f"header must be x0..x{{k-1}},y0..y{{m-1}}, got {','.join(header)}", line=1
        )
    return n_x, n_y


def load_dataset(path) -> tuple[Array, Array]:
    """Read ``(inputs, targets)`` arrays from a dataset CSV.

    Raises:
        DatasetFormatError: missing/invalid header, ragged row, or a
            value that does not parse as a float (with its line number).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError("empty file: no header row") from None
        n_x, n_y = _parse_header(header)
        xs, ys = [], []
        for line, row in enumerate(reader, start=2):
            if len(row) != n_x + n_y:
                raise DatasetFormatError(
                    f"expected {n_x + n_y} fields, got {len(row)}", line=line
                )
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise DatasetFormatError(f"non-numeric value in {row}", line=line) from None
            xs.append(values[:n_x])
            ys.append(values[n_x:])
    x_rows = np.asarray(xs, dtype=float).reshape(len(xs), n_x)
    y_rows = np.asarray(ys, dtype=float).reshape(len(ys), n_y)
    return x_rows, y_rows


def save_dataset(path, x_rows: Array, y_rows: Array) -> None:
    """Write a dataset CSV; floats use shortest round-trip formatting."""
    x_rows = np.asarray(x_rows, dtype=float)
    y_rows = np.asarray(y_rows, dtype=float)
    if x_rows.ndim != 2 or y_rows.ndim != 2 or len(x_rows) != len(y_rows):
        raise ValueError("inputs and targets must be 2-D with matching row counts")
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"x{i}" for i in range(x_rows.shape[1])]
    header += [f"y{i}" for i in range(y_rows.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x, y in zip(x_rows, y_rows):
            writer.writerow([repr(float(v)) for v in (*x, *y)])


def xor_dataset() -> tuple[Array, Array]:
    """The four XOR rows: two inputs, one 0/1 target."""
    x_rows = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y_rows = np.array([[0.0], [1.0], [1.0], [0.0]])
    return x_rows, y_rows


def two_moons(n: int, noise: float = 0.1, rng=None) -> tuple[Array, Array]:
    """Two interleaved half-circles with Gaussian noise, one-hot targets.

    Classes alternate row by row, so any prefix is nearly balanced.
    """
    if rng is None:
        raise ValueError("two_moons needs an explicit rng")
    if n < 2:
        raise ValueError("need at least one sample per class")
    angles = rng.uniform(0.0, np.pi, size=n)
    labels = np.arange(n) % 2
    x_rows = np.where(
        labels[:, None] == 0,
        np.stack([np.cos(angles), np.sin(angles)], axis=1),
        np.stack([1.0 - np.cos(angles), 0.5 - np.sin(angles)], axis=1),
    )
    x_rows = x_rows + noise * rng.standard_normal((n, 2))
    y_rows = np.zeros((n, 2))
    y_rows[np.arange(n), labels] = 1.0
    return x_rows, y_rows


def split_records(x_rows: Array, y_rows: Array, fraction: float, rng):
    """Shuffle and split into train/test parts.

    ``fraction`` is the training share; at 1.0 the test part mirrors the
    training part (useful for tiny enumerated datasets like XOR).
    """
    n = len(x_rows)
    if not 0 < fraction <= 1:
        raise ValueError("split fraction must be in (0, 1]")
    order = rng.permutation(n)
    if fraction >= 1.0:
        return x_rows[order], y_rows[order], x_rows[order], y_rows[order]
    n_train = max(1, int(round(fraction * n)))
    n_train = min(n_train, n - 1)
    train, test = order[:n_train], order[n_train:]
    return x_rows[train], y_rows[train], x_rows[test], y_rows[test]
