"""Tabular data containers, column-role CSV loading, and standardization.

Inputs and outputs are z-scored before fitting; the transform is learned
on training data only and carried around so predictions can be mapped
back to original units. Input-noise draws must be rescaled consistently
(a perturbation u in raw units becomes u / x_scale after z-scoring), so
the per-coordinate scales are exposed to the noise layer.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataSchemaError


@dataclass(frozen=True)
class Standardization:
    """Per-column affine transform (value - mean) / scale for inputs and outputs."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray

    @classmethod
    def from_training(cls, x, y):
        """Learn means and scales; constant columns get scale 1 to stay finite."""

        def scale_of(values):
            s = values.std(axis=0)
            return np.where(s == 0.0, 1.0, s)

        return cls(
            x_mean=x.mean(axis=0),
            x_scale=scale_of(x),
            y_mean=y.mean(axis=0),
            y_scale=scale_of(y),
        )

    def apply_x(self, x):
        return (x - self.x_mean) / self.x_scale

    def apply_y(self, y):
        return (y - self.y_mean) / self.y_scale

    def restore_y_mean(self, values, output):
        return values * self.y_scale[output] + self.y_mean[output]

    def restore_y_var(self, values, output):
        return values * self.y_scale[output] ** 2


@dataclass(frozen=True)
class Dataset:
    """Design matrix plus responses with named columns.

    ``y`` always has shape (n, q); single-output data uses q = 1.
    ``standardization`` records the transform already applied to the
    stored values, or None when they are in original units.
    """

    x: np.ndarray
    y: np.ndarray
    input_names: tuple = ()
    output_names: tuple = ()
    standardization: Standardization | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise DataSchemaError("x must be a 2-d array")
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] != x.shape[0]:
            raise DataSchemaError("y must align with x on the number of rows")
        if x.shape[0] < 1:
            raise DataSchemaError("dataset is empty")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise DataSchemaError("dataset contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.input_names and len(self.input_names) != x.shape[1]:
            raise DataSchemaError("input_names length does not match x columns")
        if self.output_names and len(self.output_names) != y.shape[1]:
            raise DataSchemaError("output_names length does not match y columns")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def input_dim(self):
        return self.x.shape[1]

    @property
    def n_outputs(self):
        return self.y.shape[1]


def standardize(dataset):
    """Z-score a raw dataset; refuses to standardize twice."""
    if dataset.standardization is not None:
        raise ValueError("dataset is already standardized")
    transform = Standardization.from_training(dataset.x, dataset.y)
    return replace(
        dataset,
        x=transform.apply_x(dataset.x),
        y=transform.apply_y(dataset.y),
        standardization=transform,
    )


def load_csv(path, input_columns, output_columns):
    """Read a CSV with a header row into a Dataset by column role.

    Every named column must exist and parse as a float in every row;
    violations raise DataSchemaError with the offending location.
    """
    input_columns = list(input_columns)
    output_columns = list(output_columns)
    if not input_columns or not output_columns:
        raise DataSchemaError("need at least one input column and one output column")
    overlap = set(input_columns) & set(output_columns)
    if overlap:
        raise DataSchemaError(f"columns used as both input and output: {sorted(overlap)}")
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataSchemaError(f"{path}: empty file, expected a header row")
        missing = [c for c in input_columns + output_columns if c not in reader.fieldnames]
        if missing:
            raise DataSchemaError(f"{path}: missing columns {missing}")
        x_rows, y_rows = [], []
        for index, row in enumerate(reader, start=2):  # header is line 1
            try:
                x_rows.append([float(row[c]) for c in input_columns])
                y_rows.append([float(row[c]) for c in output_columns])
            except (TypeError, ValueError) as exc:
                raise DataSchemaError(f"{path}: line {index}: {exc}") from exc
    if not x_rows:
        raise DataSchemaError(f"{path}: no data rows")
    return Dataset(
        x=np.asarray(x_rows),
        y=np.asarray(y_rows),
        input_names=tuple(input_columns),
        output_names=tuple(output_columns),
    )


def load_inputs_csv(path, input_columns):
    """Read input columns only; zero data rows is legal and yields a (0, d) array."""
    input_columns = list(input_columns)
    if not input_columns:
        raise DataSchemaError("need at least one input column")
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataSchemaError(f"{path}: empty file, expected a header row")
        missing = [c for c in input_columns if c not in reader.fieldnames]
        if missing:
            raise DataSchemaError(f"{path}: missing columns {missing}")
        rows = []
        for index, row in enumerate(reader, start=2):  # header is line 1
            try:
                rows.append([float(row[c]) for c in input_columns])
            except (TypeError, ValueError) as exc:
                raise DataSchemaError(f"{path}: line {index}: {exc}") from exc
    x = np.asarray(rows, dtype=float)
    if x.size == 0:
        x = np.empty((0, len(input_columns)))
    if not np.all(np.isfinite(x)):
        raise DataSchemaError(f"{path}: non-finite input values")
    return x


def save_csv(path, dataset):
    """Write a Dataset back to CSV with its column names."""
    input_names = dataset.input_names or tuple(f"x{i}" for i in range(dataset.input_dim))
    output_names = dataset.output_names or tuple(f"y{i}" for i in range(dataset.n_outputs))
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(input_names) + list(output_names))
        for xi, yi in zip(dataset.x, dataset.y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in yi])
