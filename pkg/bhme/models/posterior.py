"""Factors of the variational posterior q(W) q(tau) q(Z) q(v) q(alpha) q(beta)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from scipy.special import digamma, gammaln

from bhme.core.errors import NumericalError
from bhme.models.hme import PriorConfig
from bhme.models.topology import TreeTopology

LOG_2PI_E = np.log(2.0 * np.pi) + 1.0


@dataclass(frozen=True, eq=False)
class GaussianFactor:
    """Gaussian over a weight vector, or over the rows of a weight matrix.

    A 2-D ``mean`` holds one row per target dimension; all rows share
    ``covariance``.
    """

    mean: np.ndarray
    covariance: np.ndarray

    @property
    def rows(self) -> int:
        return 1 if self.mean.ndim == 1 else self.mean.shape[0]

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def log_det_covariance(self) -> float:
        try:
            chol = cholesky(self.covariance, lower=True)
        except LinAlgError as exc:
            raise NumericalError(
                "Covariance is not positive definite", term="covariance"
            ) from exc
        return float(2.0 * np.sum(np.log(np.diag(chol))))

    def second_moment(self) -> np.ndarray:
        """<v v'> = Sigma + m m' (vector factors only)."""
        return self.covariance + np.outer(self.mean, self.mean)

    def expected_sq_norm(self) -> float:
        """sum over rows of <||w_k||^2> = ||m_k||^2 + tr(Sigma)."""
        return float(np.sum(self.mean**2) + self.rows * np.trace(self.covariance))

    def quad_forms(self, inputs: np.ndarray) -> np.ndarray:
        """x_n' Sigma x_n for every row of ``inputs``."""
        return np.einsum("np,pq,nq->n", inputs, self.covariance, inputs)

    def entropy(self) -> float:
        return 0.5 * self.rows * (self.dim * LOG_2PI_E + self.log_det_covariance())


@dataclass(frozen=True, eq=False)
class GammaFactor:
    """A collection of independent Gamma(shape, rate) factors (one per node)."""

    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shape", np.atleast_1d(np.asarray(self.shape, float)))
        object.__setattr__(self, "rate", np.atleast_1d(np.asarray(self.rate, float)))

    @classmethod
    def from_prior(cls, priors: PriorConfig, count: int) -> GammaFactor:
        return cls(
            np.full(count, priors.gamma_shape), np.full(count, priors.gamma_rate)
        )

    def __len__(self) -> int:
        return self.shape.shape[0]

    def mean(self) -> np.ndarray:
        return self.shape / self.rate

    def mean_log(self) -> np.ndarray:
        return digamma(self.shape) - np.log(self.rate)

    def entropy(self) -> float:
        a, b = self.shape, self.rate
        return float(np.sum(a - np.log(b) + gammaln(a) + (1.0 - a) * digamma(a)))

    def expected_log_prior(self, priors: PriorConfig) -> float:
        """sum of E_q[ln Gam(. | a, b)] over the collection."""
        a, b = priors.gamma_shape, priors.gamma_rate
        return float(
            np.sum(
                a * np.log(b)
                - gammaln(a)
                + (a - 1.0) * self.mean_log()
                - b * self.mean()
            )
        )

    def valid(self) -> bool:
        return bool(np.all(self.shape > 0) and np.all(self.rate > 0))


@dataclass(frozen=True, eq=False)
class XiParams:
    """Variational parameters of the sigmoid bound, N x G, stored nonnegative."""

    values: np.ndarray
    clamped: int = 0


@dataclass(frozen=True, eq=False)
class Responsibilities:
    """gate_prob: N x G posterior P(z_in = 1); expert_resp: N x M path products."""

    gate_prob: np.ndarray
    expert_resp: np.ndarray


@dataclass(frozen=True, eq=False)
class HmePosterior:
    tree: TreeTopology
    gates: tuple[GaussianFactor, ...]
    experts: tuple[GaussianFactor, ...]
    tau: GammaFactor
    alpha: GammaFactor
    beta: GammaFactor
    resp: Responsibilities
    xi: XiParams
    priors: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        tree = self.tree
        counts = {
            "gates": (len(self.gates), tree.num_gates),
            "experts": (len(self.experts), tree.num_experts),
            "tau": (len(self.tau), tree.num_experts),
            "alpha": (len(self.alpha), tree.num_experts),
            "beta": (len(self.beta), tree.num_gates),
        }
        for name, (have, want) in counts.items():
            if have != want:
                raise ValueError(f"{name}: {have} factors for a tree needing {want}")

    @property
    def gate_means(self) -> np.ndarray:
        """G x p matrix of <v_i>."""
        if not self.gates:
            return np.zeros((0, self.experts[0].dim))
        return np.vstack([gate.mean for gate in self.gates])


@dataclass
class TrainingTrace:
    bound_history: list[float] = field(default_factory=list)
    temperature_history: list[float] = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0
    final_bound: float = float("nan")

    def record(self, bound: float, inverse_temperature: float) -> None:
        self.bound_history.append(bound)
        self.temperature_history.append(inverse_temperature)
        self.iterations_run = len(self.bound_history)
