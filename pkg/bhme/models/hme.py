"""Value types of the HME model: expert and gate parameters, priors, datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bhme.core.errors import DataError, InvalidArgumentError

BIAS_COLUMN = "bias"


@dataclass(frozen=True, eq=False)
class ExpertParams:
    """Linear-Gaussian expert t ~ N(W x, precision^-1 I); bias is W's last column."""

    weight_matrix: np.ndarray
    precision: float

    def __post_init__(self):
        weights = np.atleast_2d(np.asarray(self.weight_matrix, dtype=float))
        object.__setattr__(self, "weight_matrix", weights)
        if not self.precision > 0:
            raise InvalidArgumentError(
                f"Expert precision must be positive, got {self.precision}"
            )

    @property
    def target_dim(self) -> int:
        return self.weight_matrix.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weight_matrix.shape[1]


@dataclass(frozen=True, eq=False)
class GateParams:
    weight_vector: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weight_vector, dtype=float).reshape(-1)
        object.__setattr__(self, "weight_vector", weights)


@dataclass(frozen=True)
class PriorConfig:
    """Shape a and rate b of the Gamma prior on every precision and hyper-precision."""

    gamma_shape: float = 1e-2
    gamma_rate: float = 1e-4

    def __post_init__(self):
        if not (self.gamma_shape > 0 and self.gamma_rate > 0):
            raise InvalidArgumentError(
                "Gamma prior shape and rate must be strictly positive, got "
                f"a={self.gamma_shape}, b={self.gamma_rate}"
            )


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-column mean/scale of the raw (unaugmented) inputs and of the targets."""

    input_mean: np.ndarray
    input_scale: np.ndarray
    target_mean: np.ndarray
    target_scale: np.ndarray

    def to_dict(self) -> dict:
        return {
            "input_mean": self.input_mean.tolist(),
            "input_scale": self.input_scale.tolist(),
            "target_mean": self.target_mean.tolist(),
            "target_scale": self.target_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Standardization:
        return cls(
            **{
                key: np.asarray(data[key], dtype=float)
                for key in cls.__dataclass_fields__
            }
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired inputs (N x p, bias column last when augmented) and targets (N x D)."""

    inputs: np.ndarray
    targets: np.ndarray
    input_columns: tuple[str, ...] = ()
    target_columns: tuple[str, ...] = ()
    augmented: bool = True
    standardization: Standardization | None = field(default=None, compare=False)

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float)
        if targets.ndim == 1:
            targets = targets.reshape(-1, 1)
        if inputs.shape[0] != targets.shape[0]:
            raise DataError(
                f"Row counts differ: {inputs.shape[0]} inputs vs "
                f"{targets.shape[0]} targets"
            )
        if self.augmented and inputs.shape[0] and not np.all(inputs[:, -1] == 1.0):
            raise DataError("Augmentation column must be all ones")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        if not self.input_columns:
            names = [f"x{k + 1}" for k in range(self.raw_input_dim)]
            if self.augmented:
                names.append(BIAS_COLUMN)
            object.__setattr__(self, "input_columns", tuple(names))
        if not self.target_columns:
            names = [f"t{k + 1}" for k in range(targets.shape[1])]
            object.__setattr__(self, "target_columns", tuple(names))

    @classmethod
    def from_arrays(
        cls,
        inputs: np.ndarray,
        targets: np.ndarray,
        input_columns: tuple[str, ...] | list[str] = (),
        target_columns: tuple[str, ...] | list[str] = (),
        augment: bool = True,
        standardization: Standardization | None = None,
    ) -> Dataset:
        """Build a dataset from raw inputs, appending the constant bias column."""
        raw = np.asarray(inputs, dtype=float)
        if raw.ndim == 1:
            raw = raw.reshape(-1, 1)
        columns = tuple(input_columns)
        if augment:
            raw = np.hstack([raw, np.ones((raw.shape[0], 1))])
            if columns:
                columns = columns + (BIAS_COLUMN,)
        return cls(
            inputs=raw,
            targets=targets,
            input_columns=columns,
            target_columns=tuple(target_columns),
            augmented=augment,
            standardization=standardization,
        )

    @property
    def num_points(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        """Augmented input dimension p."""
        return self.inputs.shape[1]

    @property
    def raw_input_dim(self) -> int:
        return self.inputs.shape[1] - (1 if self.augmented else 0)

    @property
    def target_dim(self) -> int:
        return self.targets.shape[1]

    @property
    def raw_inputs(self) -> np.ndarray:
        return self.inputs[:, : self.raw_input_dim]

    @property
    def raw_input_columns(self) -> tuple[str, ...]:
        return self.input_columns[: self.raw_input_dim]

    def take(self, rows: np.ndarray | slice) -> Dataset:
        return Dataset(
            inputs=self.inputs[rows],
            targets=self.targets[rows],
            input_columns=self.input_columns,
            target_columns=self.target_columns,
            augmented=self.augmented,
            standardization=self.standardization,
        )
