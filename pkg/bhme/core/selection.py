"""Architecture selection by the variational lower bound.

Every enumerated topology in the requested expert range is trained from
several random starts. Runs are independent; per-run seeds are derived
from (base_seed, num_experts, topology index, restart), so the report does
not depend on the executor or on the order in which runs finish.
"""

from __future__ import annotations

import enum
import logging
import math
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from bhme.core.delimited import write_rows
from bhme.core.errors import InvalidArgumentError, NumericalError, SelectionError
from bhme.core.serialization import (
    OckhamPointDoc,
    RunEntryDoc,
    SelectionSummary,
    dataset_payload,
    training_config_payload,
)
from bhme.core.variational import TrainingConfig, train
from bhme.models.hme import Dataset
from bhme.models.topology import (
    DEFAULT_MAX_EXPERTS,
    TreeTopology,
    enumerate_topologies,
    parse_shape,
)

logger = logging.getLogger(__name__)


class SweepExecutor(str, enum.Enum):
    local = "local"
    process = "process"
    celery = "celery"


@dataclass(frozen=True)
class RunSpec:
    num_experts: int
    topology_index: int
    topology: str
    restart: int
    seed: int


@dataclass(frozen=True)
class RunEntry:
    num_experts: int
    topology_index: int
    topology: str
    restart: int
    seed: int
    final_bound: float
    converged: bool
    failed: bool = False
    iterations_run: int = 0

    @property
    def finite(self) -> bool:
        return not self.failed and math.isfinite(self.final_bound)

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (self.num_experts, self.topology_index, self.restart)


@dataclass
class SelectionReport:
    entries: list[RunEntry]
    best: RunEntry
    ockham_curve: dict[int, float]
    failed_topologies: list[str] = field(default_factory=list)
    base_seed: int = 0
    restarts_per_topology: int = 1
    converged_only: bool = True

    @property
    def best_topology(self) -> TreeTopology:
        return parse_shape(self.best.topology)


def run_seed(
    base_seed: int, num_experts: int, topology_index: int, restart: int
) -> int:
    """64-bit seed of one run, independent of scheduling."""
    sequence = np.random.SeedSequence(
        [base_seed, num_experts, topology_index, restart]
    )
    return int(sequence.generate_state(1, np.uint64)[0])


def plan_runs(
    expert_range: Iterable[int],
    restarts_per_topology: int,
    base_seed: int,
    max_experts: int = DEFAULT_MAX_EXPERTS,
) -> list[RunSpec]:
    if restarts_per_topology < 1:
        raise InvalidArgumentError(
            f"restarts_per_topology must be >= 1, got {restarts_per_topology}"
        )
    if base_seed < 0:
        raise InvalidArgumentError(f"base_seed must be >= 0, got {base_seed}")
    sizes = sorted(set(expert_range))
    if not sizes:
        raise InvalidArgumentError("expert_range is empty")
    specs = []
    for num_experts in sizes:
        for index, tree in enumerate(enumerate_topologies(num_experts, max_experts)):
            for restart in range(restarts_per_topology):
                specs.append(
                    RunSpec(
                        num_experts=num_experts,
                        topology_index=index,
                        topology=tree.shape,
                        restart=restart,
                        seed=run_seed(base_seed, num_experts, index, restart),
                    )
                )
    return specs


def run_one(spec: RunSpec, dataset: Dataset, config: TrainingConfig) -> RunEntry:
    """Train one run; numerical failures become a failed entry, never an exception."""
    try:
        _, trace = train(parse_shape(spec.topology), dataset, config, spec.seed)
    except NumericalError as exc:
        logger.warning(
            "Run failed: topology=%s restart=%d seed=%d: %s",
            spec.topology,
            spec.restart,
            spec.seed,
            exc,
        )
        iterations = exc.trace.iterations_run if exc.trace is not None else 0
        return RunEntry(
            **asdict(spec),
            final_bound=float("nan"),
            converged=False,
            failed=True,
            iterations_run=iterations,
        )
    return RunEntry(
        **asdict(spec),
        final_bound=trace.final_bound,
        converged=trace.converged,
        iterations_run=trace.iterations_run,
    )


def _run_star(args: tuple[RunSpec, Dataset, TrainingConfig]) -> RunEntry:
    return run_one(*args)


def _execute(
    specs: list[RunSpec],
    dataset: Dataset,
    config: TrainingConfig,
    executor: SweepExecutor,
    workers: int,
) -> list[RunEntry]:
    if executor is SweepExecutor.local:
        return [run_one(spec, dataset, config) for spec in specs]
    if executor is SweepExecutor.process:
        with ProcessPoolExecutor(max_workers=workers or None) as pool:
            jobs = [(spec, dataset, config) for spec in specs]
            return list(pool.map(_run_star, jobs))

    from celery import group

    from bhme.tasks.training import train_topology_run

    data = dataset_payload(dataset)
    settings_payload = training_config_payload(config)
    job = group(
        train_topology_run.s(asdict(spec), data, settings_payload) for spec in specs
    )
    return [RunEntry(**result) for result in job.apply_async().get()]


def build_report(
    entries: list[RunEntry], base_seed: int = 0, restarts_per_topology: int = 1
) -> SelectionReport:
    """Assemble a report; ties on the bound go to fewer experts, then lower index."""
    entries = sorted(entries, key=lambda entry: entry.sort_key)
    by_topology: dict[str, list[RunEntry]] = {}
    for entry in entries:
        by_topology.setdefault(entry.topology, []).append(entry)
    failed = [
        shape
        for shape, runs in by_topology.items()
        if not any(run.finite for run in runs)
    ]
    for shape in failed:
        logger.warning("Every run of topology %s failed", shape)

    eligible = [entry for entry in entries if entry.finite and entry.converged]
    converged_only = bool(eligible)
    if not eligible:
        eligible = [entry for entry in entries if entry.finite]
        if not eligible:
            raise SelectionError("Every run in the sweep failed")
        logger.warning(
            "No run converged; selecting among %d finite runs", len(eligible)
        )

    best = min(eligible, key=lambda e: (-e.final_bound, *e.sort_key))
    curve: dict[int, float] = {}
    for entry in eligible:
        current = curve.get(entry.num_experts, -math.inf)
        curve[entry.num_experts] = max(current, entry.final_bound)
    return SelectionReport(
        entries=entries,
        best=best,
        ockham_curve=dict(sorted(curve.items())),
        failed_topologies=failed,
        base_seed=base_seed,
        restarts_per_topology=restarts_per_topology,
        converged_only=converged_only,
    )


def sweep(
    dataset: Dataset,
    expert_range: Iterable[int],
    restarts_per_topology: int,
    base_seed: int = 0,
    config: TrainingConfig | None = None,
    *,
    executor: SweepExecutor | str = SweepExecutor.local,
    workers: int = 0,
    max_experts: int = DEFAULT_MAX_EXPERTS,
) -> SelectionReport:
    """Train every topology x restart and select the largest final bound."""
    config = config or TrainingConfig()
    executor = SweepExecutor(executor)
    if dataset.num_points == 0:
        raise InvalidArgumentError("Cannot run a sweep on an empty dataset")
    specs = plan_runs(expert_range, restarts_per_topology, base_seed, max_experts)
    logger.info(
        "Sweep of %d runs over %d topologies (executor=%s)",
        len(specs),
        len({spec.topology for spec in specs}),
        executor.value,
    )
    entries = _execute(specs, dataset, config, executor, workers)
    report = build_report(entries, base_seed, restarts_per_topology)
    logger.info(
        "Selected %s (restart %d) with bound %.6f",
        report.best.topology,
        report.best.restart,
        report.best.final_bound,
    )
    return report


def _topology_bounds(report: SelectionReport) -> dict[str, float]:
    bounds: dict[str, float] = {}
    for entry in report.entries:
        if _eligible(report, entry):
            current = bounds.get(entry.topology, -math.inf)
            bounds[entry.topology] = max(current, entry.final_bound)
    return bounds


def model_weights(report: SelectionReport) -> dict[str, float]:
    """Unnormalized weights exp(L_M - max L) per topology; the best gets 1."""
    bounds = _topology_bounds(report)
    if not bounds:
        raise SelectionError("Report has no usable runs")
    top = max(bounds.values())
    return {shape: math.exp(bound - top) for shape, bound in bounds.items()}


# ---------------------------------------------------------------------------
# Exports

RUN_COLUMNS = (
    "num_experts",
    "topology_index",
    "topology",
    "restart",
    "seed",
    "final_bound",
    "converged",
    "failed",
    "iterations_run",
)


def write_runs_csv(report: SelectionReport, path: str | Path) -> None:
    rows = ([getattr(e, name) for name in RUN_COLUMNS] for e in report.entries)
    write_rows(path, RUN_COLUMNS, rows)


def write_ockham_csv(report: SelectionReport, path: str | Path) -> None:
    """One row per expert count: the best bound and the topology achieving it."""
    rows = []
    for num_experts, bound in report.ockham_curve.items():
        rows.append([num_experts, bound, _curve_topology(report, num_experts)])
    write_rows(path, ("num_experts", "best_bound", "topology"), rows)


def _eligible(report: SelectionReport, entry: RunEntry) -> bool:
    return entry.finite and (entry.converged or not report.converged_only)


def _curve_topology(report: SelectionReport, num_experts: int) -> str:
    target = report.ockham_curve[num_experts]
    for entry in report.entries:
        if (
            entry.num_experts == num_experts
            and entry.final_bound == target
            and _eligible(report, entry)
        ):
            return entry.topology
    return ""


def _entry_doc(entry: RunEntry) -> RunEntryDoc:
    values = asdict(entry)
    if not math.isfinite(entry.final_bound):
        values["final_bound"] = None
    return RunEntryDoc(**values)


def summary_document(report: SelectionReport) -> SelectionSummary:
    return SelectionSummary(
        base_seed=report.base_seed,
        restarts_per_topology=report.restarts_per_topology,
        expert_range=sorted({entry.num_experts for entry in report.entries}),
        num_runs=len(report.entries),
        num_failed=sum(1 for entry in report.entries if entry.failed),
        best=_entry_doc(report.best),
        ockham_curve=[
            OckhamPointDoc(
                num_experts=num_experts,
                best_bound=bound,
                topology=_curve_topology(report, num_experts),
            )
            for num_experts, bound in report.ockham_curve.items()
        ],
        model_weights=model_weights(report),
        failed_topologies=report.failed_topologies,
    )
