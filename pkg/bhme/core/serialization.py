"""Versioned JSON documents for trained models, baselines and sweep summaries.

Documents carry no timestamps, so identical runs write identical files.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from bhme.core.annealing import AnnealingConfig
from bhme.core.baseline import BaselineModel, FeatureConfig
from bhme.core.datasets import target_variance
from bhme.core.errors import DataError
from bhme.core.variational import TrainingConfig, path_products
from bhme.models.hme import Dataset, PriorConfig, Standardization
from bhme.models.posterior import (
    GammaFactor,
    GaussianFactor,
    HmePosterior,
    Responsibilities,
    TrainingTrace,
    XiParams,
)
from bhme.models.topology import from_nested

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class GaussianFactorDoc(BaseModel):
    mean: list[list[float]] | list[float]
    covariance: list[list[float]]


class GammaFactorDoc(BaseModel):
    shape: list[float]
    rate: list[float]


class StandardizationDoc(BaseModel):
    input_mean: list[float]
    input_scale: list[float]
    target_mean: list[float]
    target_scale: list[float]


class PriorDoc(BaseModel):
    gamma_shape: float
    gamma_rate: float


class TraceDoc(BaseModel):
    bound_history: list[float]
    temperature_history: list[float]
    converged: bool
    iterations_run: int
    final_bound: float | None = None


class ModelDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: Literal["hme"] = "hme"
    topology: str
    tree: dict[str, Any]
    input_columns: list[str]
    target_columns: list[str]
    standardization: StandardizationDoc | None = None
    target_variance: list[float]
    priors: PriorDoc
    gates: list[GaussianFactorDoc]
    experts: list[GaussianFactorDoc]
    tau: GammaFactorDoc
    alpha: GammaFactorDoc
    beta: GammaFactorDoc
    xi: list[list[float]]
    gate_prob: list[list[float]]
    trace: TraceDoc
    seed: int | None = None


class FeatureDoc(BaseModel):
    kind: str
    degree: int
    num_centers: int
    width: float | None = None


class BaselineDocument(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: Literal["baseline"] = "baseline"
    features: FeatureDoc
    coefficients: list[list[float]]
    centers: list[list[float]]
    width: float
    ridge: float
    input_columns: list[str]
    target_columns: list[str]
    standardization: StandardizationDoc | None = None
    target_variance: list[float]


class RunEntryDoc(BaseModel):
    num_experts: int
    topology_index: int
    topology: str
    restart: int
    seed: int
    final_bound: float | None
    converged: bool
    failed: bool
    iterations_run: int


class OckhamPointDoc(BaseModel):
    num_experts: int
    best_bound: float
    topology: str


class SelectionSummary(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: Literal["selection"] = "selection"
    base_seed: int
    restarts_per_topology: int
    expert_range: list[int]
    num_runs: int
    num_failed: int
    best: RunEntryDoc
    ockham_curve: list[OckhamPointDoc]
    model_weights: dict[str, float]
    failed_topologies: list[str]


AnyModelDocument = Annotated[
    Union[ModelDocument, BaselineDocument], Field(discriminator="kind")
]
_model_adapter = TypeAdapter(AnyModelDocument)


# ---------------------------------------------------------------------------
# Conversions


def _standardization_doc(stats: Standardization | None) -> StandardizationDoc | None:
    return None if stats is None else StandardizationDoc(**stats.to_dict())


def _standardization(doc: StandardizationDoc | None) -> Standardization | None:
    return None if doc is None else Standardization.from_dict(doc.model_dump())


def _gaussian_doc(factor: GaussianFactor) -> GaussianFactorDoc:
    return GaussianFactorDoc(
        mean=factor.mean.tolist(), covariance=factor.covariance.tolist()
    )


def _gaussian(doc: GaussianFactorDoc) -> GaussianFactor:
    return GaussianFactor(
        np.asarray(doc.mean, dtype=float), np.asarray(doc.covariance, dtype=float)
    )


def _gamma_doc(factor: GammaFactor) -> GammaFactorDoc:
    return GammaFactorDoc(shape=factor.shape.tolist(), rate=factor.rate.tolist())


def _gamma(doc: GammaFactorDoc) -> GammaFactor:
    return GammaFactor(np.asarray(doc.shape), np.asarray(doc.rate))


def model_document(
    posterior: HmePosterior,
    trace: TrainingTrace,
    dataset: Dataset,
    seed: int | None = None,
) -> ModelDocument:
    """Document for a posterior trained on ``dataset`` (columns and statistics)."""
    final = trace.final_bound
    return ModelDocument(
        topology=posterior.tree.shape,
        tree=posterior.tree.to_nested(),
        input_columns=list(dataset.input_columns),
        target_columns=list(dataset.target_columns),
        standardization=_standardization_doc(dataset.standardization),
        target_variance=target_variance(dataset).tolist(),
        priors=PriorDoc(**asdict(posterior.priors)),
        gates=[_gaussian_doc(factor) for factor in posterior.gates],
        experts=[_gaussian_doc(factor) for factor in posterior.experts],
        tau=_gamma_doc(posterior.tau),
        alpha=_gamma_doc(posterior.alpha),
        beta=_gamma_doc(posterior.beta),
        xi=posterior.xi.values.tolist(),
        gate_prob=posterior.resp.gate_prob.tolist(),
        trace=TraceDoc(
            bound_history=trace.bound_history,
            temperature_history=trace.temperature_history,
            converged=trace.converged,
            iterations_run=trace.iterations_run,
            final_bound=final if math.isfinite(final) else None,
        ),
        seed=seed,
    )


def posterior_from_document(doc: ModelDocument) -> HmePosterior:
    tree = from_nested(doc.tree)
    shape = (len(doc.gate_prob), tree.num_gates)
    gate_prob = np.asarray(doc.gate_prob, dtype=float).reshape(shape)
    xi = np.asarray(doc.xi, dtype=float).reshape(len(doc.xi), tree.num_gates)
    experts = []
    for item in doc.experts:
        factor = _gaussian(item)
        experts.append(GaussianFactor(np.atleast_2d(factor.mean), factor.covariance))
    return HmePosterior(
        tree=tree,
        gates=tuple(_gaussian(item) for item in doc.gates),
        experts=tuple(experts),
        tau=_gamma(doc.tau),
        alpha=_gamma(doc.alpha),
        beta=_gamma(doc.beta),
        resp=Responsibilities(gate_prob, path_products(tree, gate_prob)),
        xi=XiParams(xi),
        priors=PriorConfig(**doc.priors.model_dump()),
    )


def trace_from_document(doc: ModelDocument) -> TrainingTrace:
    final = doc.trace.final_bound
    return TrainingTrace(
        bound_history=list(doc.trace.bound_history),
        temperature_history=list(doc.trace.temperature_history),
        converged=doc.trace.converged,
        iterations_run=doc.trace.iterations_run,
        final_bound=float("nan") if final is None else final,
    )


def model_standardization(
    doc: ModelDocument | BaselineDocument,
) -> Standardization | None:
    return _standardization(doc.standardization)


def baseline_document(model: BaselineModel) -> BaselineDocument:
    features = model.features
    return BaselineDocument(
        features=FeatureDoc(
            kind=features.kind.value,
            degree=features.degree,
            num_centers=features.num_centers,
            width=features.width,
        ),
        coefficients=model.coefficients.tolist(),
        centers=model.centers.tolist(),
        width=model.width,
        ridge=model.ridge,
        input_columns=list(model.input_columns),
        target_columns=list(model.target_columns),
        standardization=_standardization_doc(model.standardization),
        target_variance=np.asarray(model.target_variance).tolist(),
    )


def baseline_from_document(doc: BaselineDocument) -> BaselineModel:
    centers = np.asarray(doc.centers, dtype=float)
    return BaselineModel(
        features=FeatureConfig(**doc.features.model_dump()),
        coefficients=np.asarray(doc.coefficients, dtype=float),
        centers=centers.reshape(-1, len(doc.input_columns)),
        width=doc.width,
        ridge=doc.ridge,
        input_columns=tuple(doc.input_columns),
        target_columns=tuple(doc.target_columns),
        standardization=_standardization(doc.standardization),
        target_variance=np.asarray(doc.target_variance, dtype=float),
    )


# ---------------------------------------------------------------------------
# Files


def write_document(doc: BaseModel, path: str | Path) -> None:
    Path(path).write_text(doc.model_dump_json(indent=2) + "\n")
    logger.info("Wrote %s document to %s", getattr(doc, "kind", "json"), path)


def load_model_document(path: str | Path) -> ModelDocument | BaselineDocument:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"File not found: {path}")
    try:
        doc = _model_adapter.validate_json(path.read_text())
    except ValidationError as exc:
        raise DataError(
            f"{path}: not a model document ({exc.error_count()} errors)"
        ) from exc
    if doc.schema_version != SCHEMA_VERSION:
        raise DataError(
            f"{path}: schema_version {doc.schema_version} is not supported "
            f"(expected {SCHEMA_VERSION})"
        )
    return doc


# ---------------------------------------------------------------------------
# Task payloads (JSON-safe dicts)


def dataset_payload(dataset: Dataset) -> dict[str, Any]:
    return {
        "inputs": dataset.inputs.tolist(),
        "targets": dataset.targets.tolist(),
        "input_columns": list(dataset.input_columns),
        "target_columns": list(dataset.target_columns),
        "augmented": dataset.augmented,
    }


def dataset_from_payload(payload: dict[str, Any]) -> Dataset:
    rows = len(payload["inputs"])
    inputs = np.asarray(payload["inputs"], dtype=float)
    targets = np.asarray(payload["targets"], dtype=float)
    return Dataset(
        inputs=inputs.reshape(rows, len(payload["input_columns"])),
        targets=targets.reshape(rows, len(payload["target_columns"])),
        input_columns=tuple(payload["input_columns"]),
        target_columns=tuple(payload["target_columns"]),
        augmented=payload["augmented"],
    )


def training_config_payload(config: TrainingConfig) -> dict[str, Any]:
    payload = asdict(config)
    payload["annealing"]["mode"] = config.annealing.mode.value
    return payload


def training_config_from_payload(payload: dict[str, Any]) -> TrainingConfig:
    values = dict(payload)
    values["annealing"] = AnnealingConfig(**values["annealing"])
    values["priors"] = PriorConfig(**values["priors"])
    return TrainingConfig(**values)
