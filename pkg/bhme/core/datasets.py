"""Synthetic datasets, two-link arm kinematics and standardization."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from bhme.core.errors import DataError, InvalidArgumentError
from bhme.models.hme import Dataset, Standardization

# Region membership is decided with this slack on the joint limits.
_LIMIT_SLACK = 1e-9


def gen_toy(n: int = 200, noise_sd: float = 0.05, seed: int = 0) -> Dataset:
    """Inverse of x = t + 0.3 sin(2 pi t) + noise: inputs x, targets t ~ U(0, 1)."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if noise_sd < 0:
        raise InvalidArgumentError(f"noise_sd must be >= 0, got {noise_sd}")
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, size=n)
    x = t + 0.3 * np.sin(2.0 * np.pi * t) + rng.normal(0.0, noise_sd, size=n)
    return Dataset.from_arrays(x, t, input_columns=("x",), target_columns=("t",))


@dataclass(frozen=True)
class ArmGeometry:
    link1: float = 0.8
    link2: float = 0.2
    theta1_range: tuple[float, float] = (0.3, 1.2)
    theta2_range: tuple[float, float] = (math.pi / 2, 3 * math.pi / 2)

    def __post_init__(self):
        if self.link1 <= 0 or self.link2 <= 0:
            raise InvalidArgumentError("Link lengths must be positive")
        for name in ("theta1_range", "theta2_range"):
            low, high = getattr(self, name)
            if not low <= high:
                raise InvalidArgumentError(f"{name} is empty: ({low}, {high})")

    def within_limits(self, theta1, theta2) -> np.ndarray:
        lo1, hi1 = self.theta1_range
        lo2, hi2 = self.theta2_range
        theta1, theta2 = np.asarray(theta1), np.asarray(theta2)
        return (
            (theta1 >= lo1 - _LIMIT_SLACK)
            & (theta1 <= hi1 + _LIMIT_SLACK)
            & (theta2 >= lo2 - _LIMIT_SLACK)
            & (theta2 <= hi2 + _LIMIT_SLACK)
        )


class ArmRegion(str, enum.Enum):
    A = "A"  # only the elbow solution with theta2 <= pi is reachable
    B = "B"  # both solutions are reachable
    C = "C"  # only the solution with theta2 > pi is reachable
    outside = "outside"


def forward_kinematics(theta1, theta2, geometry: ArmGeometry | None = None):
    """End-effector position (x1, x2) with the minus-sign convention.

    x1 = L1 cos(theta1) - L2 cos(theta1 + theta2)
    x2 = L1 sin(theta1) - L2 sin(theta1 + theta2)
    """
    geometry = geometry or ArmGeometry()
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    x1 = geometry.link1 * np.cos(theta1) - geometry.link2 * np.cos(theta1 + theta2)
    x2 = geometry.link1 * np.sin(theta1) - geometry.link2 * np.sin(theta1 + theta2)
    if x1.ndim == 0:
        return float(x1), float(x2)
    return x1, x2


def gen_arm_dataset(
    n: int = 1000, geometry: ArmGeometry | None = None, seed: int = 0
) -> Dataset:
    """Noiseless arm data: inputs are positions, targets the joint angles."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    geometry = geometry or ArmGeometry()
    rng = np.random.default_rng(seed)
    theta1 = rng.uniform(*geometry.theta1_range, size=n)
    theta2 = rng.uniform(*geometry.theta2_range, size=n)
    x1, x2 = forward_kinematics(theta1, theta2, geometry)
    return Dataset.from_arrays(
        np.column_stack([x1, x2]),
        np.column_stack([theta1, theta2]),
        input_columns=("x1", "x2"),
        target_columns=("theta1", "theta2"),
    )


def end_effector_error(predicted_angles, true_position, geometry=None):
    """Distance between the position reached by ``predicted_angles`` and the target.

    Accepts a single (theta1, theta2) pair or an N x 2 array.
    """
    angles = np.asarray(predicted_angles, dtype=float)
    position = np.asarray(true_position, dtype=float)
    single = angles.ndim == 1
    angles = np.atleast_2d(angles)
    position = np.atleast_2d(position)
    if angles.shape[1] != 2 or position.shape[1] != 2:
        raise InvalidArgumentError("Angles and positions must have two columns")
    x1, x2 = forward_kinematics(angles[:, 0], angles[:, 1], geometry)
    error = np.hypot(x1 - position[:, 0], x2 - position[:, 1])
    return float(error[0]) if single else error


def inverse_solutions(position, geometry: ArmGeometry | None = None) -> np.ndarray:
    """Both joint solutions reaching ``position``: an N x 2 x 2 array.

    Solution 0 has theta2 in [0, pi], solution 1 has theta2 in [pi, 2 pi].
    theta1 is wrapped to (-pi, pi]. Unreachable positions give NaN.
    """
    geometry = geometry or ArmGeometry()
    position = np.atleast_2d(np.asarray(position, dtype=float))
    l1, l2 = geometry.link1, geometry.link2
    radius_sq = np.sum(position**2, axis=1)
    cos_theta2 = (l1**2 + l2**2 - radius_sq) / (2.0 * l1 * l2)
    reachable = np.abs(cos_theta2) <= 1.0 + 1e-12
    elbow = np.arccos(np.clip(cos_theta2, -1.0, 1.0))
    target = position[:, 0] + 1j * position[:, 1]
    solutions = np.empty((position.shape[0], 2, 2))
    for k, theta2 in enumerate((elbow, 2.0 * np.pi - elbow)):
        # position = exp(i theta1) * (L1 - L2 exp(i theta2))
        theta1 = np.angle(target) - np.angle(l1 - l2 * np.exp(1j * theta2))
        theta1 = np.angle(np.exp(1j * theta1))
        solutions[:, k, 0] = np.where(reachable, theta1, np.nan)
        solutions[:, k, 1] = np.where(reachable, theta2, np.nan)
    return solutions


def classify_region(position, geometry: ArmGeometry | None = None) -> list[ArmRegion]:
    """Label positions by which inverse solutions fall inside the joint limits."""
    geometry = geometry or ArmGeometry()
    solutions = inverse_solutions(position, geometry)
    low = geometry.within_limits(solutions[:, 0, 0], solutions[:, 0, 1])
    high = geometry.within_limits(solutions[:, 1, 0], solutions[:, 1, 1])
    regions = []
    for lo_ok, hi_ok in zip(low, high):
        if lo_ok and hi_ok:
            regions.append(ArmRegion.B)
        elif lo_ok:
            regions.append(ArmRegion.A)
        elif hi_ok:
            regions.append(ArmRegion.C)
        else:
            regions.append(ArmRegion.outside)
    return regions


def region_medians(errors: np.ndarray, regions: list[ArmRegion]) -> dict[str, float]:
    """Median error overall and per region; regions without points are omitted."""
    errors = np.asarray(errors, dtype=float)
    labels = np.array([region.value for region in regions])
    summary = {"all": float(np.median(errors))} if errors.size else {}
    for region in ArmRegion:
        mask = labels == region.value
        if np.any(mask):
            summary[region.value] = float(np.median(errors[mask]))
    return summary


def standardize(
    dataset: Dataset, stats: Standardization | None = None
) -> tuple[Dataset, Standardization]:
    """Zero mean, unit variance per raw input and target column.

    Statistics come from ``dataset`` unless ``stats`` (typically from the
    training split) is given.
    """
    raw, targets = dataset.raw_inputs, dataset.targets
    if stats is None:
        if dataset.num_points == 0:
            raise DataError("Cannot standardize an empty dataset")
        input_scale = raw.std(axis=0)
        target_scale = targets.std(axis=0)
        columns = dataset.raw_input_columns + dataset.target_columns
        for name, scale in zip(columns, np.concatenate([input_scale, target_scale])):
            if not scale > 0:
                raise DataError(f"Column {name!r} has zero variance")
        stats = Standardization(
            input_mean=raw.mean(axis=0),
            input_scale=input_scale,
            target_mean=targets.mean(axis=0),
            target_scale=target_scale,
        )
    scaled = Dataset.from_arrays(
        (raw - stats.input_mean) / stats.input_scale,
        (targets - stats.target_mean) / stats.target_scale,
        input_columns=dataset.raw_input_columns,
        target_columns=dataset.target_columns,
        augment=dataset.augmented,
        standardization=stats,
    )
    return scaled, stats


def unstandardize_targets(values: np.ndarray, stats: Standardization) -> np.ndarray:
    return np.asarray(values, dtype=float) * stats.target_scale + stats.target_mean


def unstandardize(dataset: Dataset) -> Dataset:
    """Invert :func:`standardize` using the statistics stored on ``dataset``."""
    stats = dataset.standardization
    if stats is None:
        return dataset
    raw = dataset.raw_inputs * stats.input_scale + stats.input_mean
    return Dataset.from_arrays(
        raw,
        unstandardize_targets(dataset.targets, stats),
        input_columns=dataset.raw_input_columns,
        target_columns=dataset.target_columns,
        augment=dataset.augmented,
    )


def target_variance(dataset: Dataset) -> np.ndarray:
    """Per-column target variance in original units."""
    variance = dataset.targets.var(axis=0)
    stats = dataset.standardization
    return variance if stats is None else variance * stats.target_scale**2
