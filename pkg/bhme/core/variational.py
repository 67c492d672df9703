"""Coordinate-ascent variational inference for the Bayesian HME.

The posterior factorizes as q(W) q(tau) q(Z) q(v) q(alpha) q(beta). Every
gate likelihood term is replaced by the local sigmoid bound, which keeps
q(v) Gaussian, and every update below is the exact maximizer of the bound
L~ with respect to its own factor. The data-conditional term
ln p~(T, Z | U) is multiplied by an inverse temperature ``s`` so the same
updates serve deterministic annealing; s = 1 is ordinary inference.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import entr, expit, log_expit, logit

from bhme.core.annealing import (
    AnnealingConfig,
    annealing_schedule,
    is_terminal,
)
from bhme.core.config import Settings
from bhme.core.errors import InvalidArgumentError, NumericalError
from bhme.core.logistic_bound import lambda_of_xi, optimal_xi_squared_batch
from bhme.models.hme import Dataset, PriorConfig
from bhme.models.posterior import (
    GammaFactor,
    GaussianFactor,
    HmePosterior,
    Responsibilities,
    TrainingTrace,
    XiParams,
)
from bhme.models.topology import TreeTopology

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
_PROB_FLOOR = 1e-15
_RESP_FLOOR = 1e-300
_INIT_RIDGE = 1e-6

FACTOR_NAMES = ("gates", "experts", "tau", "alpha", "beta", "xi", "z")


@dataclass(frozen=True)
class TrainingConfig:
    max_iterations: int = 800
    min_iterations: int = 50
    tolerance: float = 1e-6
    annealing: AnnealingConfig = field(default_factory=AnnealingConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    xi_init: float = 1.0
    gate_init_sd: float = 0.1
    zeta_max_passes: int = 25
    zeta_tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.min_iterations < 1:
            raise InvalidArgumentError("min_iterations must be >= 1")
        if self.tolerance < 0:
            raise InvalidArgumentError("tolerance must be >= 0")
        if self.zeta_max_passes < 1:
            raise InvalidArgumentError("zeta_max_passes must be >= 1")
        if self.gate_init_sd < 0 or self.xi_init < 0:
            raise InvalidArgumentError("gate_init_sd and xi_init must be >= 0")

    @classmethod
    def from_settings(cls, settings: Settings) -> TrainingConfig:
        return cls(
            max_iterations=settings.MAX_ITERATIONS,
            min_iterations=settings.MIN_ITERATIONS,
            tolerance=settings.TOLERANCE,
            annealing=AnnealingConfig(
                mode=settings.ANNEALING_MODE,
                initial=settings.ANNEALING_INITIAL,
                decay=settings.ANNEALING_DECAY,
                switch_iteration=settings.ANNEALING_SWITCH_ITERATION,
                terminal=settings.ANNEALING_TERMINAL,
            ),
            priors=PriorConfig(
                gamma_shape=settings.PRIOR_GAMMA_SHAPE,
                gamma_rate=settings.PRIOR_GAMMA_RATE,
            ),
            xi_init=settings.XI_INIT,
            gate_init_sd=settings.GATE_INIT_SD,
            zeta_max_passes=settings.ZETA_MAX_PASSES,
            zeta_tolerance=settings.ZETA_TOLERANCE,
        )


@dataclass(frozen=True)
class FiniteDifferenceReport:
    factor: str
    max_gradient: float
    tolerance: float
    num_parameters: int

    @property
    def passed(self) -> bool:
        return self.max_gradient < self.tolerance


# ---------------------------------------------------------------------------
# Moments shared by the updates and the bound


def _check_inputs(posterior: HmePosterior, dataset: Dataset) -> None:
    expert = posterior.experts[0]
    if expert.dim != dataset.input_dim or expert.rows != dataset.target_dim:
        raise InvalidArgumentError(
            f"Posterior expects {expert.dim} inputs / {expert.rows} targets, "
            f"dataset has {dataset.input_dim} / {dataset.target_dim}"
        )


def _factorize(precision: np.ndarray, term: str):
    try:
        return cho_factor(precision, lower=True)
    except LinAlgError as exc:
        raise NumericalError(
            f"Precision matrix of {term} is not positive definite", term=term
        ) from exc


def _gaussian_from_precision(
    precision: np.ndarray, linear: np.ndarray, term: str
) -> GaussianFactor:
    """N(C^-1 b, C^-1); ``linear`` may hold one right-hand side per row."""
    chol = _factorize(precision, term)
    covariance = cho_solve(chol, np.eye(precision.shape[0]))
    covariance = 0.5 * (covariance + covariance.T)
    mean = cho_solve(chol, linear.T).T
    return GaussianFactor(mean=mean, covariance=covariance)


def expected_residuals(posterior: HmePosterior, dataset: Dataset) -> np.ndarray:
    """N x M matrix of <||t_n - W_j x_n||^2> under q(W_j)."""
    x, t = dataset.inputs, dataset.targets
    columns = []
    for expert in posterior.experts:
        mean = np.atleast_2d(expert.mean)
        residual = t - x @ mean.T
        columns.append(
            np.sum(residual**2, axis=1) + expert.rows * expert.quad_forms(x)
        )
    return np.column_stack(columns) if columns else np.zeros((x.shape[0], 0))


def expert_log_terms(posterior: HmePosterior, dataset: Dataset) -> np.ndarray:
    """g_jn = <ln N(t_n | W_j x_n, tau_j^-1 I)>, an N x M matrix."""
    dim = dataset.target_dim
    tau_mean = posterior.tau.mean()
    tau_log = posterior.tau.mean_log()
    return 0.5 * dim * (tau_log - LOG_2PI) - 0.5 * tau_mean * expected_residuals(
        posterior, dataset
    )


def path_products(tree: TreeTopology, gate_prob: np.ndarray) -> np.ndarray:
    """E[zeta_jn] as products of gate probabilities along each expert path."""
    num_points = gate_prob.shape[0]
    if tree.num_gates == 0:
        return np.ones((num_points, 1))
    p = np.clip(gate_prob, _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    log_resp = np.log(p) @ tree.left_mask.T + np.log1p(-p) @ tree.right_mask.T
    resp = np.clip(np.exp(log_resp), _RESP_FLOOR, 1.0)
    return resp / resp.sum(axis=1, keepdims=True)


def _gate_activation_moments(
    posterior: HmePosterior, inputs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """<a_in> = <v_i>'x_n and <a_in^2> = x_n'<v_i v_i'>x_n, both N x G."""
    num_points = inputs.shape[0]
    if not posterior.gates:
        empty = np.zeros((num_points, 0))
        return empty, empty
    first = inputs @ posterior.gate_means.T
    second = np.column_stack(
        [
            first[:, i] ** 2 + gate.quad_forms(inputs)
            for i, gate in enumerate(posterior.gates)
        ]
    )
    return first, second


# ---------------------------------------------------------------------------
# Factor updates


def update_q_Z(
    posterior: HmePosterior,
    dataset: Dataset,
    inverse_temperature: float = 1.0,
    *,
    max_passes: int = 25,
    tolerance: float = 1e-10,
) -> Responsibilities:
    """Re-estimate q(Z) one gate at a time until the gate probabilities settle.

    h_in = <v_i>'x_n + sum_j sign_ji E[zeta_jn without gate i] g_jn, where the
    sign is +1 for experts under the left child of gate i and -1 for the right.
    """
    _check_inputs(posterior, dataset)
    tree = posterior.tree
    num_points = dataset.num_points
    if tree.num_gates == 0:
        return Responsibilities(np.zeros((num_points, 0)), np.ones((num_points, 1)))

    g = expert_log_terms(posterior, dataset)
    activation = dataset.inputs @ posterior.gate_means.T
    signs = tree.path_signs
    left, right = tree.left_mask, tree.right_mask
    gate_prob = np.array(posterior.resp.gate_prob, dtype=float, copy=True)
    if gate_prob.shape != (num_points, tree.num_gates):
        gate_prob = np.full((num_points, tree.num_gates), 0.5)

    for _ in range(max_passes):
        largest_change = 0.0
        for i in range(tree.num_gates):
            p = np.clip(gate_prob, _PROB_FLOOR, 1.0 - _PROB_FLOOR)
            log_p, log_q = np.log(p), np.log1p(-p)
            excluded = (
                log_p @ left.T
                + log_q @ right.T
                - np.outer(log_p[:, i], left[:, i])
                - np.outer(log_q[:, i], right[:, i])
            )
            on_path = signs[:, i] != 0
            h = activation[:, i] + (
                np.exp(excluded[:, on_path]) * g[:, on_path]
            ) @ signs[on_path, i]
            if not np.all(np.isfinite(h)):
                raise NumericalError("Non-finite gate activation h_in", term="h_in")
            updated = np.clip(
                expit(inverse_temperature * h), _PROB_FLOOR, 1.0 - _PROB_FLOOR
            )
            change = np.max(np.abs(updated - gate_prob[:, i]), initial=0.0)
            largest_change = max(largest_change, float(change))
            gate_prob[:, i] = updated
        if largest_change < tolerance:
            break

    return Responsibilities(gate_prob, path_products(tree, gate_prob))


def update_xi(posterior: HmePosterior, dataset: Dataset) -> XiParams:
    """xi_in = sqrt(x_n' <v_i v_i'> x_n)."""
    _check_inputs(posterior, dataset)
    columns = []
    clamped = 0
    for gate in posterior.gates:
        squared, count = optimal_xi_squared_batch(dataset.inputs, gate.second_moment())
        columns.append(np.sqrt(squared))
        clamped += count
    values = (
        np.column_stack(columns) if columns else np.zeros((dataset.num_points, 0))
    )
    return XiParams(values=values, clamped=clamped)


def update_q_v(
    posterior: HmePosterior, dataset: Dataset, inverse_temperature: float = 1.0
) -> tuple[GaussianFactor, ...]:
    """Gaussian gate factors under the sigmoid bound.

    C_i = <beta_i> I + 2 s sum_n lambda(xi_in) x_n x_n' and
    mean = C_i^-1 s sum_n (<z_in> - 1/2) x_n, summed over every data point.
    """
    _check_inputs(posterior, dataset)
    x = dataset.inputs
    s = inverse_temperature
    beta_mean = posterior.beta.mean()
    lam = lambda_of_xi(posterior.xi.values)
    eye = np.eye(dataset.input_dim)
    factors = []
    for i in range(posterior.tree.num_gates):
        precision = beta_mean[i] * eye + 2.0 * s * (x.T * lam[:, i]) @ x
        linear = s * x.T @ (posterior.resp.gate_prob[:, i] - 0.5)
        factors.append(_gaussian_from_precision(precision, linear, f"gate {i}"))
    return tuple(factors)


def update_q_W(
    posterior: HmePosterior, dataset: Dataset, inverse_temperature: float = 1.0
) -> tuple[GaussianFactor, ...]:
    """Expert weight factors, one covariance shared by the D rows.

    A_j = <alpha_j> I + s <tau_j> sum_n r_jn x_n x_n' and row k has mean
    s <tau_j> A_j^-1 sum_n r_jn t_nk x_n.
    """
    _check_inputs(posterior, dataset)
    x, t = dataset.inputs, dataset.targets
    s = inverse_temperature
    alpha_mean = posterior.alpha.mean()
    tau_mean = posterior.tau.mean()
    eye = np.eye(dataset.input_dim)
    factors = []
    for j in range(posterior.tree.num_experts):
        r = posterior.resp.expert_resp[:, j]
        scale = s * tau_mean[j]
        precision = alpha_mean[j] * eye + scale * (x.T * r) @ x
        linear = scale * (t.T * r) @ x
        factors.append(_gaussian_from_precision(precision, linear, f"expert {j}"))
    return tuple(factors)


def update_q_tau(
    posterior: HmePosterior, dataset: Dataset, inverse_temperature: float = 1.0
) -> GammaFactor:
    """Gamma(a + s D sum_n r_jn / 2, b + (s/2) sum_n r_jn <||t_n - W_j x_n||^2>)."""
    _check_inputs(posterior, dataset)
    priors = posterior.priors
    s = inverse_temperature
    r = posterior.resp.expert_resp
    residuals = expected_residuals(posterior, dataset)
    shape = priors.gamma_shape + 0.5 * s * dataset.target_dim * r.sum(axis=0)
    rate = priors.gamma_rate + 0.5 * s * np.sum(r * residuals, axis=0)
    return GammaFactor(shape, rate)


def update_q_W_and_tau(
    posterior: HmePosterior, dataset: Dataset, inverse_temperature: float = 1.0
) -> tuple[tuple[GaussianFactor, ...], GammaFactor]:
    """q(W) first, then q(tau) against the fresh weight moments."""
    experts = update_q_W(posterior, dataset, inverse_temperature)
    fresh = replace(posterior, experts=experts)
    tau = update_q_tau(fresh, dataset, inverse_temperature)
    return experts, tau


def update_hyper_factors(posterior: HmePosterior) -> tuple[GammaFactor, GammaFactor]:
    """q(alpha_j) = Gamma(a + Dp/2, b + E||W_j||^2 / 2); q(beta_i) likewise with p/2."""
    priors = posterior.priors
    a, b = priors.gamma_shape, priors.gamma_rate
    alpha = GammaFactor(
        np.array([a + 0.5 * e.rows * e.dim for e in posterior.experts]),
        np.array([b + 0.5 * e.expected_sq_norm() for e in posterior.experts]),
    )
    beta = GammaFactor(
        np.array([a + 0.5 * g.dim for g in posterior.gates]),
        np.array([b + 0.5 * g.expected_sq_norm() for g in posterior.gates]),
    )
    return alpha, beta


# ---------------------------------------------------------------------------
# Lower bound


def lower_bound_terms(
    posterior: HmePosterior, dataset: Dataset, inverse_temperature: float = 1.0
) -> dict[str, float]:
    """Named components of L~; their sum is :func:`lower_bound`."""
    _check_inputs(posterior, dataset)
    s = inverse_temperature
    priors = posterior.priors
    resp = posterior.resp
    terms: dict[str, float] = {}

    terms["expert_likelihood"] = s * float(
        np.sum(resp.expert_resp * expert_log_terms(posterior, dataset))
    )

    mean_act, second_act = _gate_activation_moments(posterior, dataset.inputs)
    xi = posterior.xi.values
    gate_bound = (
        resp.gate_prob * mean_act
        + log_expit(xi)
        - 0.5 * (mean_act + xi)
        - lambda_of_xi(xi) * (second_act - xi**2)
    )
    terms["gate_likelihood"] = s * float(np.sum(gate_bound))

    alpha_mean, alpha_log = posterior.alpha.mean(), posterior.alpha.mean_log()
    terms["weight_prior"] = float(
        sum(
            0.5 * e.rows * e.dim * (alpha_log[j] - LOG_2PI)
            - 0.5 * alpha_mean[j] * e.expected_sq_norm()
            for j, e in enumerate(posterior.experts)
        )
    )
    beta_mean, beta_log = posterior.beta.mean(), posterior.beta.mean_log()
    terms["gate_prior"] = float(
        sum(
            0.5 * g.dim * (beta_log[i] - LOG_2PI)
            - 0.5 * beta_mean[i] * g.expected_sq_norm()
            for i, g in enumerate(posterior.gates)
        )
    )
    terms["tau_prior"] = posterior.tau.expected_log_prior(priors)
    terms["alpha_prior"] = posterior.alpha.expected_log_prior(priors)
    terms["beta_prior"] = posterior.beta.expected_log_prior(priors)

    terms["weight_entropy"] = float(sum(e.entropy() for e in posterior.experts))
    terms["gate_entropy"] = float(sum(g.entropy() for g in posterior.gates))
    terms["tau_entropy"] = posterior.tau.entropy()
    terms["alpha_entropy"] = posterior.alpha.entropy()
    terms["beta_entropy"] = posterior.beta.entropy()
    terms["z_entropy"] = float(
        np.sum(entr(resp.gate_prob) + entr(1.0 - resp.gate_prob))
    )

    for name, value in terms.items():
        if not math.isfinite(value):
            raise NumericalError(f"Lower bound term {name} is {value}", term=name)
    return terms


def lower_bound(
    posterior: HmePosterior, dataset: Dataset, inverse_temperature: float = 1.0
) -> float:
    """L~ = E[ln p~(T, Z | U)] + E[ln p(U)] - E[ln q(U)], data term scaled by s."""
    terms = lower_bound_terms(posterior, dataset, inverse_temperature)
    return float(sum(terms.values()))


# ---------------------------------------------------------------------------
# Initialization and training


def _neighbourhood_fit(
    dataset: Dataset, anchor: int, size: int, joint_scale: np.ndarray
) -> np.ndarray:
    """Ridge least squares on the ``size`` points nearest ``anchor`` in (x, t) space."""
    joint = np.hstack([dataset.raw_inputs, dataset.targets]) / joint_scale
    distance = np.sum((joint - joint[anchor]) ** 2, axis=1)
    rows = np.argsort(distance, kind="stable")[:size]
    x, t = dataset.inputs[rows], dataset.targets[rows]
    gram = x.T @ x + _INIT_RIDGE * np.eye(dataset.input_dim)
    return cho_solve(_factorize(gram, "initial fit"), x.T @ t).T


def initialize_posterior(
    tree: TreeTopology,
    dataset: Dataset,
    config: TrainingConfig,
    rng: np.random.Generator,
) -> HmePosterior:
    """Random starting point that breaks the symmetry between experts.

    Gate means are drawn from N(0, gate_init_sd^2); each expert mean is a
    least-squares fit to the neighbourhood of a randomly chosen data point.
    Precisions start at the prior and xi at ``config.xi_init``.
    """
    priors = config.priors
    p, num_points = dataset.input_dim, dataset.num_points
    init_cov = (priors.gamma_rate / priors.gamma_shape) * np.eye(p)

    gates = tuple(
        GaussianFactor(rng.normal(0.0, config.gate_init_sd, size=p), init_cov.copy())
        for _ in range(tree.num_gates)
    )

    joint_scale = np.hstack([dataset.raw_inputs, dataset.targets]).std(axis=0)
    joint_scale = np.where(joint_scale > 0, joint_scale, 1.0)
    size = min(num_points, max(p + 1, math.ceil(num_points / tree.num_experts)))
    anchors = rng.integers(0, num_points, size=tree.num_experts)
    experts = tuple(
        GaussianFactor(
            _neighbourhood_fit(dataset, int(anchor), size, joint_scale), init_cov.copy()
        )
        for anchor in anchors
    )

    gate_means = (
        np.vstack([g.mean for g in gates]) if gates else np.zeros((0, p))
    )
    gate_prob = np.clip(
        expit(dataset.inputs @ gate_means.T), _PROB_FLOOR, 1.0 - _PROB_FLOOR
    )
    return HmePosterior(
        tree=tree,
        gates=gates,
        experts=experts,
        tau=GammaFactor.from_prior(priors, tree.num_experts),
        alpha=GammaFactor.from_prior(priors, tree.num_experts),
        beta=GammaFactor.from_prior(priors, tree.num_gates),
        resp=Responsibilities(gate_prob, path_products(tree, gate_prob)),
        xi=XiParams(np.full((num_points, tree.num_gates), config.xi_init)),
        priors=priors,
    )


def sweep_once(
    posterior: HmePosterior,
    dataset: Dataset,
    inverse_temperature: float,
    config: TrainingConfig,
) -> HmePosterior:
    """One cycle of the update order q_Z, xi, q_v, q_W + tau, alpha and beta."""
    s = inverse_temperature
    resp = update_q_Z(
        posterior,
        dataset,
        s,
        max_passes=config.zeta_max_passes,
        tolerance=config.zeta_tolerance,
    )
    posterior = replace(posterior, resp=resp)
    posterior = replace(posterior, xi=update_xi(posterior, dataset))
    posterior = replace(posterior, gates=update_q_v(posterior, dataset, s))
    experts, tau = update_q_W_and_tau(posterior, dataset, s)
    posterior = replace(posterior, experts=experts, tau=tau)
    alpha, beta = update_hyper_factors(posterior)
    return replace(posterior, alpha=alpha, beta=beta)


def train(
    tree: TreeTopology,
    dataset: Dataset,
    config: TrainingConfig | None = None,
    seed: int | np.random.SeedSequence = 0,
) -> tuple[HmePosterior, TrainingTrace]:
    """Annealed coordinate ascent from a seeded random start.

    Convergence is only declared at the terminal temperature, once at least
    ``min_iterations`` sweeps have run and the relative bound change of a
    sweep falls below ``tolerance``. A :class:`NumericalError` raised during
    training carries the partial trace.
    """
    config = config or TrainingConfig()
    if dataset.num_points == 0:
        raise InvalidArgumentError("Cannot train on an empty dataset")

    rng = np.random.default_rng(seed)
    trace = TrainingTrace()
    logger.info(
        "Training %s on %d points (max_iterations=%d)",
        tree.shape,
        dataset.num_points,
        config.max_iterations,
    )

    iteration = 0
    try:
        posterior = initialize_posterior(tree, dataset, config, rng)
        previous: float | None = None
        for iteration in range(config.max_iterations):
            s = annealing_schedule(iteration, config.annealing)
            posterior = sweep_once(posterior, dataset, s, config)
            bound = lower_bound(posterior, dataset, s)
            trace.record(bound, s)
            logger.debug("iteration=%d s=%.6g bound=%.12g", iteration, s, bound)

            terminal = is_terminal(iteration, config.annealing)
            if (
                terminal
                and previous is not None
                and iteration + 1 >= config.min_iterations
                and abs(bound - previous) < config.tolerance * abs(bound)
            ):
                trace.converged = True
                break
            previous = bound if terminal else None

        trace.final_bound = lower_bound(posterior, dataset, 1.0)
    except NumericalError as exc:
        exc.iteration = iteration if exc.iteration is None else exc.iteration
        exc.trace = trace
        logger.warning(
            "Training %s failed at iteration %d: %s", tree.shape, iteration, exc
        )
        raise

    if trace.converged:
        logger.info(
            "Converged after %d iterations, bound=%.6f",
            trace.iterations_run,
            trace.final_bound,
        )
    else:
        logger.warning(
            "Not converged after %d iterations, bound=%.6f",
            trace.iterations_run,
            trace.final_bound,
        )
    return posterior, trace


# ---------------------------------------------------------------------------
# Finite-difference stationarity check


def _flatten(posterior: HmePosterior, factor: str) -> tuple[np.ndarray, np.ndarray]:
    """(parameters, scales); Gamma factors use log space, gate probabilities logits."""
    if factor == "gates":
        values = np.concatenate([g.mean.ravel() for g in posterior.gates] + [[]])
        return values, np.maximum(np.abs(values), 1.0)
    if factor == "experts":
        values = np.concatenate([e.mean.ravel() for e in posterior.experts])
        return values, np.maximum(np.abs(values), 1.0)
    if factor in ("tau", "alpha", "beta"):
        gamma: GammaFactor = getattr(posterior, factor)
        values = np.log(np.concatenate([gamma.shape, gamma.rate]))
        return values, np.ones_like(values)
    if factor == "xi":
        values = posterior.xi.values.ravel()
        return values, np.maximum(np.abs(values), 1.0)
    values = logit(posterior.resp.gate_prob).ravel()
    return values, np.ones_like(values)


def _unflatten(
    posterior: HmePosterior, factor: str, values: np.ndarray
) -> HmePosterior:
    if factor in ("gates", "experts"):
        originals = getattr(posterior, factor)
        rebuilt, offset = [], 0
        for item in originals:
            size = item.mean.size
            mean = values[offset : offset + size].reshape(item.mean.shape)
            rebuilt.append(GaussianFactor(mean, item.covariance))
            offset += size
        return replace(posterior, **{factor: tuple(rebuilt)})
    if factor in ("tau", "alpha", "beta"):
        count = len(getattr(posterior, factor))
        params = np.exp(values)
        gamma = GammaFactor(params[:count], params[count:])
        return replace(posterior, **{factor: gamma})
    if factor == "xi":
        shaped = values.reshape(posterior.xi.values.shape)
        return replace(posterior, xi=XiParams(shaped, posterior.xi.clamped))
    gate_prob = expit(values).reshape(posterior.resp.gate_prob.shape)
    return replace(
        posterior,
        resp=Responsibilities(gate_prob, path_products(posterior.tree, gate_prob)),
    )


def finite_difference_check(
    posterior: HmePosterior,
    dataset: Dataset,
    which_factor: str,
    inverse_temperature: float = 1.0,
    *,
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> FiniteDifferenceReport:
    """Central differences of L~ with respect to one factor's parameters.

    Each parameter moves by ``step`` times its scale, so the reported
    gradient is already scaled by the parameter magnitude. Gamma factors are
    perturbed in (log shape, log rate) and gate probabilities in logit space.
    """
    if which_factor not in FACTOR_NAMES:
        raise InvalidArgumentError(
            f"Unknown factor {which_factor!r}; "
            f"expected one of {', '.join(FACTOR_NAMES)}"
        )
    values, scales = _flatten(posterior, which_factor)
    largest = 0.0
    for k in range(values.shape[0]):
        delta = step * scales[k]
        plus, minus = values.copy(), values.copy()
        plus[k] += delta
        minus[k] -= delta
        upper = lower_bound(
            _unflatten(posterior, which_factor, plus), dataset, inverse_temperature
        )
        lower = lower_bound(
            _unflatten(posterior, which_factor, minus), dataset, inverse_temperature
        )
        largest = max(largest, abs(upper - lower) / (2.0 * step))
    report = FiniteDifferenceReport(which_factor, largest, tolerance, values.shape[0])
    logger.debug(
        "Finite-difference check %s: max scaled gradient %.3e over %d parameters",
        which_factor,
        largest,
        values.shape[0],
    )
    return report
