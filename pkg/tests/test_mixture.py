"""Model densities, mixing coefficients and the generative sampler."""

import itertools

import numpy as np
import pytest
from scipy.special import expit

from bhme.core.errors import InvalidArgumentError
from bhme.core.mixture import (
    conditional_mixture_log_density,
    expert_log_density,
    gate_log_probability,
    log_likelihood,
    mixing_coefficients,
    sample_target,
)
from bhme.models.hme import Dataset, ExpertParams, GateParams
from bhme.models.topology import enumerate_topologies, parse_shape, zeta_indicator

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def enumerated_mixing(x, tree, gates):
    """sum over all gate assignments of prod_i p(z_i | x) zeta_j(z)."""
    probabilities = [expit(gate.weight_vector @ x) for gate in gates]
    mixing = np.zeros(tree.num_experts)
    for z in itertools.product((0, 1), repeat=tree.num_gates):
        weight = np.prod([p if zi else 1.0 - p for p, zi in zip(probabilities, z)])
        for j in range(tree.num_experts):
            mixing[j] += weight * zeta_indicator(tree, z, j)
    return mixing


def random_parameters(tree, rng, p=3, d=2):
    experts = [
        ExpertParams(rng.normal(size=(d, p)), rng.uniform(0.5, 3.0))
        for _ in range(tree.num_experts)
    ]
    gates = [GateParams(rng.normal(size=p)) for _ in range(tree.num_gates)]
    return experts, gates


def test_expert_log_density_examples():
    expert = ExpertParams(np.array([[2.0]]), 1.0)
    assert expert_log_density([2.0], [1.0], expert) == pytest.approx(-HALF_LOG_2PI)
    assert expert_log_density([3.0], [1.0], expert) == pytest.approx(
        -HALF_LOG_2PI - 0.5
    )
    wide = ExpertParams(np.eye(2), 4.0)
    value = expert_log_density([0.5, 0.0], [0.0, 0.0], wide)
    assert value == pytest.approx(np.log(4.0) - np.log(2.0 * np.pi) - 0.5)
    assert value == pytest.approx(-0.9516, abs=1e-4)


def test_expert_rejects_bad_precision_and_shapes():
    with pytest.raises(InvalidArgumentError):
        ExpertParams(np.eye(2), 0.0)
    with pytest.raises(InvalidArgumentError):
        expert_log_density([1.0], [1.0, 2.0], ExpertParams(np.eye(2), 1.0))


def test_gate_log_probability_examples():
    zero = GateParams(np.zeros(2))
    for z in (0, 1):
        assert gate_log_probability(z, [1.0, 3.0], zero) == pytest.approx(np.log(0.5))
    gate = GateParams(np.array([2.0]))
    assert gate_log_probability(1, [1.0], gate) == pytest.approx(
        gate_log_probability(0, [-1.0], gate)
    )
    assert gate_log_probability(1, [1.0], gate) == pytest.approx(-0.126928, abs=1e-6)


def test_gate_probabilities_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(200):
        gate = GateParams(rng.normal(scale=5.0, size=3))
        x = rng.normal(size=3)
        total = np.exp(gate_log_probability(1, x, gate)) + np.exp(
            gate_log_probability(0, x, gate)
        )
        assert total == pytest.approx(1.0, abs=1e-12)


def test_mixing_fig1_zero_gates(fig1_tree):
    gates = [GateParams(np.zeros(2)) for _ in range(2)]
    np.testing.assert_allclose(
        mixing_coefficients(np.array([0.3, 1.0]), fig1_tree, gates), [0.5, 0.25, 0.25]
    )


def test_mixing_single_expert():
    tree = parse_shape("E")
    np.testing.assert_allclose(mixing_coefficients(np.ones(2), tree, []), [1.0])


def test_mixing_wrong_gate_count(fig1_tree):
    with pytest.raises(InvalidArgumentError):
        mixing_coefficients(np.ones(2), fig1_tree, [GateParams(np.zeros(2))])


@pytest.mark.parametrize("num_experts", range(2, 6))
def test_mixing_matches_enumeration(num_experts):
    rng = np.random.default_rng(num_experts)
    for tree in enumerate_topologies(num_experts):
        _, gates = random_parameters(tree, rng)
        for _ in range(5):
            x = rng.normal(size=3)
            mixing = mixing_coefficients(x, tree, gates)
            np.testing.assert_allclose(
                mixing, enumerated_mixing(x, tree, gates), atol=1e-12
            )
            assert mixing.sum() == pytest.approx(1.0, abs=1e-12)


def test_mixing_batch_rows_sum_to_one():
    rng = np.random.default_rng(1)
    tree = enumerate_topologies(5)[0]
    _, gates = random_parameters(tree, rng)
    mixing = mixing_coefficients(rng.normal(scale=3.0, size=(1000, 3)), tree, gates)
    np.testing.assert_allclose(mixing.sum(axis=1), 1.0, atol=1e-12)


def test_single_expert_mixture_equals_expert_density():
    rng = np.random.default_rng(2)
    tree = parse_shape("E")
    experts, _ = random_parameters(tree, rng)
    t, x = rng.normal(size=2), rng.normal(size=3)
    assert conditional_mixture_log_density(t, x, tree, experts, []) == pytest.approx(
        expert_log_density(t, x, experts[0])
    )


def test_identical_experts_ignore_gates(fig1_tree):
    rng = np.random.default_rng(3)
    expert = ExpertParams(rng.normal(size=(2, 3)), 2.0)
    _, gates = random_parameters(fig1_tree, rng)
    t, x = rng.normal(size=2), rng.normal(size=3)
    value = conditional_mixture_log_density(t, x, fig1_tree, [expert] * 3, gates)
    assert value == pytest.approx(expert_log_density(t, x, expert), abs=1e-12)


@pytest.mark.parametrize("num_experts", range(2, 6))
def test_mixture_density_matches_enumeration(num_experts):
    rng = np.random.default_rng(10 + num_experts)
    for tree in enumerate_topologies(num_experts):
        experts, gates = random_parameters(tree, rng)
        t, x = rng.normal(size=2), rng.normal(size=3)
        mixing = enumerated_mixing(x, tree, gates)
        densities = [np.exp(expert_log_density(t, x, e)) for e in experts]
        expected = np.log(np.dot(mixing, densities))
        value = conditional_mixture_log_density(t, x, tree, experts, gates)
        assert value == pytest.approx(expected, abs=1e-10)


def test_sampler_saturated_gates(fig1_tree):
    rng = np.random.default_rng(4)
    experts = [ExpertParams(np.array([[float(j)]]), 1.0) for j in range(3)]
    gates = [GateParams(np.array([50.0])), GateParams(np.array([50.0]))]
    for _ in range(50):
        _, chosen, assignment = sample_target(
            np.array([1.0]), fig1_tree, experts, gates, rng
        )
        assert chosen == 0
        assert assignment == {0: 1}


def test_sampler_frequencies_match_mixing(fig1_tree):
    rng = np.random.default_rng(5)
    experts = [ExpertParams(np.array([[float(j)]]), 1.0) for j in range(3)]
    gates = [GateParams(np.zeros(1)), GateParams(np.zeros(1))]
    draws = 20000
    counts = np.zeros(3)
    for _ in range(draws):
        _, chosen, _ = sample_target(np.array([1.0]), fig1_tree, experts, gates, rng)
        counts[chosen] += 1
    np.testing.assert_allclose(counts / draws, [0.5, 0.25, 0.25], atol=0.015)


def test_sampler_high_precision_concentrates(fig1_tree):
    rng = np.random.default_rng(6)
    experts = [ExpertParams(np.array([[float(j + 1)]]), 1e12) for j in range(3)]
    gates = [GateParams(np.zeros(1)), GateParams(np.zeros(1))]
    for _ in range(20):
        target, chosen, _ = sample_target(
            np.array([2.0]), fig1_tree, experts, gates, rng
        )
        assert target[0] == pytest.approx(2.0 * (chosen + 1), abs=1e-4)


def test_log_likelihood_properties(fig1_tree):
    rng = np.random.default_rng(7)
    experts, gates = random_parameters(fig1_tree, rng, p=2, d=1)
    inputs, targets = rng.normal(size=(12, 1)), rng.normal(size=(12, 1))
    dataset = Dataset.from_arrays(inputs, targets)
    total = log_likelihood(dataset, fig1_tree, experts, gates)

    naive = sum(
        conditional_mixture_log_density(t, x, fig1_tree, experts, gates)
        for t, x in zip(dataset.targets, dataset.inputs)
    )
    assert total == pytest.approx(naive, abs=1e-10)

    single = dataset.take(slice(0, 1))
    assert log_likelihood(single, fig1_tree, experts, gates) == pytest.approx(
        conditional_mixture_log_density(
            single.targets[0], single.inputs[0], fig1_tree, experts, gates
        )
    )

    doubled = Dataset.from_arrays(
        np.vstack([inputs, inputs]), np.vstack([targets, targets])
    )
    assert log_likelihood(doubled, fig1_tree, experts, gates) == pytest.approx(
        2.0 * total
    )


def test_log_likelihood_rejects_empty(fig1_tree):
    rng = np.random.default_rng(8)
    experts, gates = random_parameters(fig1_tree, rng, p=2, d=1)
    empty = Dataset.from_arrays(np.zeros((0, 1)), np.zeros((0, 1)))
    with pytest.raises(InvalidArgumentError):
        log_likelihood(empty, fig1_tree, experts, gates)
