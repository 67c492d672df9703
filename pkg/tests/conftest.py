"""Shared fixtures: small trees, datasets and hand-built posteriors."""

import numpy as np
import pytest

from bhme.core.annealing import AnnealingConfig
from bhme.core.datasets import gen_toy
from bhme.core.variational import TrainingConfig, initialize_posterior
from bhme.models.hme import Dataset, PriorConfig
from bhme.models.posterior import (
    GammaFactor,
    GaussianFactor,
    HmePosterior,
    Responsibilities,
    XiParams,
)
from bhme.models.topology import parse_shape

FIG1_SHAPE = "(E,(E,E))"


@pytest.fixture
def fig1_tree():
    """Root gate with expert 0 on the left and a gate over experts 1, 2 on the right."""
    return parse_shape(FIG1_SHAPE)


@pytest.fixture
def toy_dataset():
    return gen_toy(60, 0.05, seed=3)


@pytest.fixture
def fast_config():
    """A short schedule for tests that only need a few sweeps."""
    return TrainingConfig(
        max_iterations=40,
        min_iterations=5,
        annealing=AnnealingConfig(switch_iteration=10),
    )


def random_dataset(rng, num_points=20, raw_dim=1, target_dim=1):
    inputs = rng.normal(size=(num_points, raw_dim))
    targets = rng.normal(size=(num_points, target_dim))
    return Dataset.from_arrays(inputs, targets)


def random_posterior(tree, dataset, rng, priors=None):
    """A valid random starting point (the same one training uses)."""
    config = TrainingConfig(priors=priors or PriorConfig(), gate_init_sd=0.5)
    return initialize_posterior(tree, dataset, config, rng)


@pytest.fixture
def make_posterior():
    """Factory for posteriors with given means and (by default) zero covariances.

    ``expert_means`` is a list of D x p arrays, ``gate_means`` a list of
    length-p vectors; tau is fixed at ``tau_mean``.
    """

    def build(
        tree,
        gate_means,
        expert_means,
        tau_mean=1.0,
        num_points=0,
        gate_cov=0.0,
        priors=None,
    ):
        expert_means = [np.atleast_2d(np.asarray(m, dtype=float)) for m in expert_means]
        p = expert_means[0].shape[1]
        gates = tuple(
            GaussianFactor(np.asarray(m, dtype=float), gate_cov * np.eye(p))
            for m in gate_means
        )
        experts = tuple(GaussianFactor(m, np.zeros((p, p))) for m in expert_means)
        m, g = tree.num_experts, tree.num_gates
        return HmePosterior(
            tree=tree,
            gates=gates,
            experts=experts,
            tau=GammaFactor(np.full(m, tau_mean), np.ones(m)),
            alpha=GammaFactor(np.ones(m), np.ones(m)),
            beta=GammaFactor(np.ones(g), np.ones(g)),
            resp=Responsibilities(
                np.full((num_points, g), 0.5), np.full((num_points, m), 1.0 / m)
            ),
            xi=XiParams(np.ones((num_points, g))),
            priors=priors or PriorConfig(),
        )

    return build
