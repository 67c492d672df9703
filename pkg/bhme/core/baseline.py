"""Closed-form least-squares regressor on polynomial or radial-basis features.

It models the conditional mean only, so on a multi-valued inverse problem
it predicts the average of the valid solutions.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve
from scipy.spatial.distance import cdist

from bhme.core.datasets import target_variance
from bhme.core.errors import InvalidArgumentError
from bhme.models.hme import Dataset, Standardization

logger = logging.getLogger(__name__)


class FeatureKind(str, enum.Enum):
    polynomial = "polynomial"
    rbf = "rbf"


@dataclass(frozen=True)
class FeatureConfig:
    kind: FeatureKind = FeatureKind.rbf
    degree: int = 1
    num_centers: int = 20
    # RBF width; None picks d_max / sqrt(2 * num_centers)
    width: float | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", FeatureKind(self.kind))
        except ValueError as exc:
            raise InvalidArgumentError(f"Unknown feature kind {self.kind!r}") from exc
        if self.kind is FeatureKind.polynomial and self.degree < 1:
            raise InvalidArgumentError(f"degree must be >= 1, got {self.degree}")
        if self.kind is FeatureKind.rbf and self.num_centers < 1:
            raise InvalidArgumentError(
                f"num_centers must be >= 1, got {self.num_centers}"
            )
        if self.width is not None and self.width <= 0:
            raise InvalidArgumentError(f"width must be positive, got {self.width}")


@dataclass(frozen=True, eq=False)
class BaselineModel:
    features: FeatureConfig
    coefficients: np.ndarray  # K x D
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    width: float = 1.0
    ridge: float = 0.0
    input_columns: tuple[str, ...] = ()
    target_columns: tuple[str, ...] = ()
    standardization: Standardization | None = None
    target_variance: np.ndarray | None = None


def _monomials(num_inputs: int, degree: int) -> list[tuple[int, ...]]:
    terms: list[tuple[int, ...]] = [()]
    for order in range(1, degree + 1):
        terms.extend(itertools.combinations_with_replacement(range(num_inputs), order))
    return terms


def expand_features(
    raw_inputs: np.ndarray,
    features: FeatureConfig,
    centers: np.ndarray | None = None,
    width: float = 1.0,
) -> np.ndarray:
    """Design matrix with a leading constant column."""
    raw_inputs = np.atleast_2d(np.asarray(raw_inputs, dtype=float))
    if features.kind is FeatureKind.polynomial:
        columns = [
            np.prod(raw_inputs[:, list(term)], axis=1)
            for term in _monomials(raw_inputs.shape[1], features.degree)
        ]
        return np.column_stack(columns)
    distance_sq = cdist(raw_inputs, centers, "sqeuclidean")
    basis = np.exp(-distance_sq / (2.0 * width**2))
    return np.hstack([np.ones((raw_inputs.shape[0], 1)), basis])


def choose_centers(raw_inputs: np.ndarray, num_centers: int) -> np.ndarray:
    """Evenly spaced rows of the lexicographically sorted inputs.

    The choice depends on the set of rows only, not on their order.
    """
    order = np.lexsort(raw_inputs.T[::-1])
    ranked = raw_inputs[order]
    count = min(num_centers, ranked.shape[0])
    picks = np.linspace(0, ranked.shape[0] - 1, count).round().astype(int)
    return ranked[np.unique(picks)]


def _default_width(centers: np.ndarray) -> float:
    if centers.shape[0] < 2:
        return 1.0
    largest = float(np.max(cdist(centers, centers)))
    return largest / np.sqrt(2.0 * centers.shape[0]) if largest > 0 else 1.0


def fit_baseline(
    dataset: Dataset, features: FeatureConfig | None = None, ridge: float = 0.0
) -> BaselineModel:
    """Ridge least squares (Phi'Phi + ridge I) B = Phi'T on expanded raw inputs."""
    features = features or FeatureConfig()
    if dataset.num_points == 0:
        raise InvalidArgumentError("Cannot fit a baseline on an empty dataset")
    if ridge < 0:
        raise InvalidArgumentError(f"ridge must be >= 0, got {ridge}")
    raw = dataset.raw_inputs
    centers = np.zeros((0, raw.shape[1]))
    width = 1.0
    if features.kind is FeatureKind.rbf:
        centers = choose_centers(raw, features.num_centers)
        width = features.width or _default_width(centers)
    design = expand_features(raw, features, centers, width)
    if ridge == 0 and np.linalg.matrix_rank(design) < design.shape[1]:
        raise InvalidArgumentError(
            "Normal equations are singular; use a ridge > 0 or fewer features"
        )
    gram = design.T @ design + ridge * np.eye(design.shape[1])
    coefficients = solve(gram, design.T @ dataset.targets, assume_a="pos")
    logger.info(
        "Fitted %s baseline with %d features on %d points (ridge=%g)",
        features.kind.value,
        design.shape[1],
        dataset.num_points,
        ridge,
    )
    return BaselineModel(
        features=features,
        coefficients=coefficients,
        centers=centers,
        width=width,
        ridge=ridge,
        input_columns=dataset.raw_input_columns,
        target_columns=dataset.target_columns,
        standardization=dataset.standardization,
        target_variance=target_variance(dataset),
    )


def predict_baseline(model: BaselineModel, x) -> np.ndarray:
    """Targets for raw (unaugmented) inputs: one vector or an N x d matrix."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    design = expand_features(
        np.atleast_2d(x), model.features, model.centers, model.width
    )
    if design.shape[1] != model.coefficients.shape[0]:
        raise InvalidArgumentError(
            f"Inputs expand to {design.shape[1]} features, the model has "
            f"{model.coefficients.shape[0]}"
        )
    outputs = design @ model.coefficients
    return outputs[0] if single else outputs
