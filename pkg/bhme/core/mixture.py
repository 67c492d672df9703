"""Conditional mixture densities of the HME model.

All densities are evaluated in log space; mixing coefficients are products
of log-sigmoids along each expert's path, combined with log-sum-exp.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy.special import log_expit, logsumexp

from bhme.core.errors import InvalidArgumentError
from bhme.models.hme import Dataset, ExpertParams, GateParams
from bhme.models.topology import GateNode, TreeTopology

LOG_2PI = np.log(2.0 * np.pi)


def expert_log_density(t: np.ndarray, x: np.ndarray, expert: ExpertParams) -> float:
    """ln N(t | W x, tau^-1 I)."""
    t = np.asarray(t, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if expert.weight_matrix.shape != (t.shape[0], x.shape[0]):
        raise InvalidArgumentError(
            f"Expert weights {expert.weight_matrix.shape} do not match "
            f"target {t.shape[0]} x input {x.shape[0]}"
        )
    residual = t - expert.weight_matrix @ x
    dim = t.shape[0]
    return float(
        0.5 * dim * (np.log(expert.precision) - LOG_2PI)
        - 0.5 * expert.precision * residual @ residual
    )


def gate_log_probability(z: int, x: np.ndarray, gate: GateParams) -> float:
    """z ln sigma(v'x) + (1 - z) ln(1 - sigma(v'x))."""
    activation = float(gate.weight_vector @ np.asarray(x, dtype=float).reshape(-1))
    return float(log_expit(activation) if z else log_expit(-activation))


def log_mixing_coefficients(
    inputs: np.ndarray, tree: TreeTopology, gates: Sequence[GateParams]
) -> np.ndarray:
    """ln pi_j(x_n) for every row of ``inputs``, an N x M matrix."""
    if len(gates) != tree.num_gates:
        raise InvalidArgumentError(
            f"Expected {tree.num_gates} gate parameter sets, got {len(gates)}"
        )
    if tree.num_gates == 0:
        return np.zeros((inputs.shape[0], 1))
    weights = np.vstack([gate.weight_vector for gate in gates])
    activation = inputs @ weights.T
    return log_expit(activation) @ tree.left_mask.T + log_expit(
        -activation
    ) @ tree.right_mask.T


def mixing_coefficients(
    x: np.ndarray, tree: TreeTopology, gates: Sequence[GateParams]
) -> np.ndarray:
    """pi_j(x) for every expert; accepts one input vector or an N x p matrix."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    log_pi = log_mixing_coefficients(np.atleast_2d(x), tree, gates)
    pi = np.exp(log_pi)
    return pi[0] if single else pi


def expert_log_densities(
    targets: np.ndarray, inputs: np.ndarray, experts: Sequence[ExpertParams]
) -> np.ndarray:
    """N x M matrix of ln N(t_n | W_j x_n, tau_j^-1 I)."""
    dim = targets.shape[1]
    columns = []
    for expert in experts:
        residual = targets - inputs @ expert.weight_matrix.T
        columns.append(
            0.5 * dim * (np.log(expert.precision) - LOG_2PI)
            - 0.5 * expert.precision * np.sum(residual**2, axis=1)
        )
    return np.column_stack(columns)


def conditional_mixture_log_density(
    t: np.ndarray,
    x: np.ndarray,
    tree: TreeTopology,
    experts: Sequence[ExpertParams],
    gates: Sequence[GateParams],
) -> float:
    """ln sum_j pi_j(x) N(t | W_j x, tau_j^-1 I)."""
    t = np.asarray(t, dtype=float).reshape(1, -1)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if len(experts) != tree.num_experts:
        raise InvalidArgumentError(
            f"Expected {tree.num_experts} experts, got {len(experts)}"
        )
    joint = log_mixing_coefficients(x, tree, gates)
    joint = joint + expert_log_densities(t, x, experts)
    return float(logsumexp(joint, axis=1)[0])


def sample_target(
    x: np.ndarray,
    tree: TreeTopology,
    experts: Sequence[ExpertParams],
    gates: Sequence[GateParams],
    rng: np.random.Generator,
) -> tuple[np.ndarray, int, dict[int, int]]:
    """Draw t by descending the tree; returns (t, expert index, on-path gate values)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    node = tree.root
    assignment: dict[int, int] = {}
    while isinstance(node, GateNode):
        probability_left = np.exp(gate_log_probability(1, x, gates[node.index]))
        z = int(rng.random() < probability_left)
        assignment[node.index] = z
        node = node.left if z else node.right
    expert = experts[node.index]
    mean = expert.weight_matrix @ x
    target = mean + rng.standard_normal(mean.shape[0]) / np.sqrt(expert.precision)
    return target, node.index, assignment


def log_likelihood(
    dataset: Dataset,
    tree: TreeTopology,
    experts: Sequence[ExpertParams],
    gates: Sequence[GateParams],
) -> float:
    """sum_n ln p(t_n | x_n) with the gate variables marginalized."""
    if dataset.num_points == 0:
        raise InvalidArgumentError("log_likelihood needs a nonempty dataset")
    joint = log_mixing_coefficients(dataset.inputs, tree, gates) + expert_log_densities(
        dataset.targets, dataset.inputs, experts
    )
    return float(np.sum(logsumexp(joint, axis=1)))
