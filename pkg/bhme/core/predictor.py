"""Predictions from a trained posterior.

Gating uses plug-in posterior means by default; the probit variant averages
each gate's sigmoid over its Gaussian factor. The predictive density is the
plug-in mixture with <W_j> and <tau_j>, not the full Student-t predictive.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import log_expit, logsumexp

from bhme.core.errors import InvalidArgumentError
from bhme.core.mixture import expert_log_densities, log_mixing_coefficients
from bhme.models.hme import ExpertParams, GateParams
from bhme.models.posterior import HmePosterior


class GatingMode(str, enum.Enum):
    plugin = "plugin"
    probit = "probit"


class PredictMode(str, enum.Enum):
    most_probable_expert = "most-probable-expert"
    mixture_mean = "mixture-mean"


@dataclass(frozen=True, eq=False)
class Prediction:
    point: np.ndarray
    expert_chosen: int
    mixing: np.ndarray
    per_expert_means: np.ndarray


@dataclass(frozen=True, eq=False)
class BatchPrediction:
    points: np.ndarray  # N x D
    experts_chosen: np.ndarray  # N
    mixing: np.ndarray  # N x M


def point_estimates(
    posterior: HmePosterior,
) -> tuple[list[ExpertParams], list[GateParams]]:
    """Posterior means as model parameters: (<W_j>, <tau_j>) and <v_i>."""
    tau_mean = posterior.tau.mean()
    experts = [
        ExpertParams(np.atleast_2d(factor.mean), float(tau_mean[j]))
        for j, factor in enumerate(posterior.experts)
    ]
    gates = [GateParams(factor.mean) for factor in posterior.gates]
    return experts, gates


def _as_matrix(x, posterior: HmePosterior) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    expected = posterior.experts[0].dim
    if x.shape[1] != expected:
        raise InvalidArgumentError(
            f"Inputs have {x.shape[1]} columns, the model expects {expected} "
            "(including the bias column)"
        )
    return x, single


def _log_mixing(
    x: np.ndarray, posterior: HmePosterior, gating: GatingMode
) -> np.ndarray:
    tree = posterior.tree
    if gating is GatingMode.plugin or tree.num_gates == 0:
        _, gates = point_estimates(posterior)
        return log_mixing_coefficients(x, tree, gates)
    # E[sigma(a)] ~ sigma(mu / sqrt(1 + pi s^2 / 8)) for a ~ N(mu, s^2)
    columns = []
    for factor in posterior.gates:
        mu = x @ factor.mean
        variance = factor.quad_forms(x)
        columns.append(mu / np.sqrt(1.0 + np.pi * variance / 8.0))
    activation = np.column_stack(columns)
    return (
        log_expit(activation) @ tree.left_mask.T
        + log_expit(-activation) @ tree.right_mask.T
    )


def predictive_mixing(
    x, posterior: HmePosterior, gating: GatingMode | str = GatingMode.plugin
) -> np.ndarray:
    """pi_j(x) at the posterior; one input vector or an N x p matrix (augmented)."""
    x, single = _as_matrix(x, posterior)
    mixing = np.exp(_log_mixing(x, posterior, GatingMode(gating)))
    mixing /= mixing.sum(axis=1, keepdims=True)
    return mixing[0] if single else mixing


def expert_means(x, posterior: HmePosterior) -> np.ndarray:
    """<W_j> x for every expert: N x M x D (M x D for one input)."""
    x, single = _as_matrix(x, posterior)
    means = np.stack(
        [x @ np.atleast_2d(factor.mean).T for factor in posterior.experts], axis=1
    )
    return means[0] if single else means


def predict_batch(
    inputs,
    posterior: HmePosterior,
    mode: PredictMode | str = PredictMode.most_probable_expert,
    gating: GatingMode | str = GatingMode.plugin,
) -> BatchPrediction:
    inputs, _ = _as_matrix(inputs, posterior)
    mixing = predictive_mixing(inputs, posterior, gating)
    means = expert_means(inputs, posterior)
    # argmax keeps the lowest index on ties
    chosen = np.argmax(mixing, axis=1)
    if PredictMode(mode) is PredictMode.mixture_mean:
        points = np.einsum("nm,nmd->nd", mixing, means)
    else:
        points = means[np.arange(inputs.shape[0]), chosen]
    return BatchPrediction(points=points, experts_chosen=chosen, mixing=mixing)


def predict_point(
    x,
    posterior: HmePosterior,
    mode: PredictMode | str = PredictMode.most_probable_expert,
    gating: GatingMode | str = GatingMode.plugin,
) -> Prediction:
    """Mean of the most probable expert at ``x`` (or the mixture mean)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    batch = predict_batch(x.reshape(1, -1), posterior, mode, gating)
    return Prediction(
        point=batch.points[0],
        expert_chosen=int(batch.experts_chosen[0]),
        mixing=batch.mixing[0],
        per_expert_means=expert_means(x, posterior),
    )


def predictive_log_density(
    t, x, posterior: HmePosterior, gating: GatingMode | str = GatingMode.plugin
):
    """ln sum_j pi_j(x) N(t | <W_j> x, <tau_j>^-1 I), a plug-in approximation.

    ``t`` and ``x`` may be single vectors or matching N-row matrices.
    """
    x, single = _as_matrix(x, posterior)
    t = np.asarray(t, dtype=float)
    t = t.reshape(x.shape[0], -1) if t.ndim < 2 else t
    experts, _ = point_estimates(posterior)
    joint = _log_mixing(x, posterior, GatingMode(gating)) + expert_log_densities(
        t, x, experts
    )
    values = logsumexp(joint, axis=1)
    return float(values[0]) if single else values


def standardized_mse(predictions, targets, target_variances) -> float:
    """Mean over points and target dimensions of squared error / variance."""
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.ndim == 1:
        predictions = predictions.reshape(-1, 1)
    if targets.ndim == 1:
        targets = targets.reshape(-1, 1)
    variances = np.atleast_1d(np.asarray(target_variances, dtype=float))
    if predictions.shape != targets.shape:
        raise InvalidArgumentError(
            f"Predictions {predictions.shape} and targets {targets.shape} differ"
        )
    if predictions.shape[0] == 0:
        raise InvalidArgumentError("standardized_mse needs at least one point")
    if variances.shape[0] != targets.shape[1]:
        raise InvalidArgumentError(
            f"Expected {targets.shape[1]} target variances, got {variances.shape[0]}"
        )
    if np.any(variances <= 0):
        raise InvalidArgumentError("Target variances must be positive")
    return float(np.mean((predictions - targets) ** 2 / variances))
