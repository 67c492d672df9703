"""Topology sweeps, selection rules and report exports."""

import csv
import json
import math

import pytest

from bhme.core.annealing import AnnealingConfig
from bhme.core.datasets import gen_toy
from bhme.core.errors import InvalidArgumentError, SelectionError
from bhme.core.selection import (
    RunEntry,
    build_report,
    model_weights,
    plan_runs,
    run_seed,
    summary_document,
    sweep,
    write_ockham_csv,
    write_runs_csv,
)
from bhme.core.variational import TrainingConfig


def entry(num_experts, index, restart, bound, converged=True, failed=False):
    shapes = {
        1: ["E"],
        2: ["(E,E)"],
        3: ["(E,(E,E))"],
        4: ["((E,E),(E,E))", "(E,(E,(E,E)))"],
    }
    return RunEntry(
        num_experts=num_experts,
        topology_index=index,
        topology=shapes[num_experts][index],
        restart=restart,
        seed=run_seed(0, num_experts, index, restart),
        final_bound=bound,
        converged=converged,
        failed=failed,
        iterations_run=10,
    )


@pytest.fixture
def sweep_config():
    return TrainingConfig(
        max_iterations=25,
        min_iterations=5,
        annealing=AnnealingConfig(switch_iteration=8),
    )


@pytest.fixture
def small_dataset():
    return gen_toy(40, 0.05, seed=1)


def test_model_weights_follow_bound_differences():
    report = build_report(
        [entry(1, 0, 0, -10.0), entry(2, 0, 0, -10.0 - math.log(2.0))]
    )
    weights = model_weights(report)
    assert weights["E"] == pytest.approx(1.0)
    assert weights["(E,E)"] == pytest.approx(0.5)


def test_best_is_largest_bound():
    report = build_report(
        [entry(1, 0, 0, -12.0), entry(2, 0, 0, -9.0), entry(2, 0, 1, -11.0)]
    )
    assert report.best.topology == "(E,E)"
    assert report.best.restart == 0
    assert report.ockham_curve == {1: -12.0, 2: -9.0}
    assert report.best_topology.num_experts == 2


def test_ties_prefer_fewer_experts_then_lower_index():
    report = build_report([entry(3, 0, 0, -5.0), entry(2, 0, 1, -5.0)])
    assert report.best.num_experts == 2
    report = build_report(
        [entry(4, 1, 0, -5.0), entry(4, 0, 1, -5.0), entry(4, 0, 0, -5.0)]
    )
    assert (report.best.topology_index, report.best.restart) == (0, 0)


def test_non_converged_runs_are_ignored_when_any_converged():
    report = build_report(
        [entry(1, 0, 0, -20.0), entry(2, 0, 0, -1.0, converged=False)]
    )
    assert report.best.num_experts == 1
    assert report.converged_only
    assert 2 not in report.ockham_curve


def test_falls_back_to_finite_runs_without_convergence():
    report = build_report(
        [
            entry(1, 0, 0, -20.0, converged=False),
            entry(2, 0, 0, -3.0, converged=False),
        ]
    )
    assert report.best.num_experts == 2
    assert not report.converged_only


def test_failed_runs_are_skipped_and_flagged():
    report = build_report(
        [
            entry(1, 0, 0, -20.0),
            entry(2, 0, 0, float("nan"), converged=False, failed=True),
            entry(2, 0, 1, float("nan"), converged=False, failed=True),
        ]
    )
    assert report.best.num_experts == 1
    assert report.failed_topologies == ["(E,E)"]


def test_all_failed_raises():
    failed = [entry(2, 0, r, float("nan"), False, True) for r in range(3)]
    with pytest.raises(SelectionError):
        build_report(failed)


def test_run_seed_is_deterministic_and_distinct():
    assert run_seed(7, 3, 0, 2) == run_seed(7, 3, 0, 2)
    seeds = {run_seed(7, m, i, r) for m in (2, 3) for i in (0, 1) for r in range(5)}
    assert len(seeds) == 20
    assert run_seed(8, 3, 0, 2) != run_seed(7, 3, 0, 2)


def test_plan_runs_covers_every_topology():
    specs = plan_runs(range(2, 6), 2, base_seed=0)
    # 1 + 1 + 2 + 3 topologies, two restarts each
    assert len(specs) == 14
    assert [spec.num_experts for spec in specs] == sorted(
        spec.num_experts for spec in specs
    )
    assert specs[0].seed == run_seed(0, 2, 0, 0)


@pytest.mark.parametrize(
    "expert_range, restarts, seed",
    [([2], 0, 0), ([], 1, 0), ([2], 1, -1), ([9], 1, 0)],
)
def test_plan_runs_rejects_bad_arguments(expert_range, restarts, seed):
    with pytest.raises(InvalidArgumentError):
        plan_runs(expert_range, restarts, seed)


def test_single_expert_sweep(small_dataset, sweep_config):
    report = sweep(small_dataset, [1], 1, base_seed=3, config=sweep_config)
    assert len(report.entries) == 1
    assert report.best.topology == "E"
    assert math.isfinite(report.best.final_bound)


def test_sweep_is_deterministic(small_dataset, sweep_config):
    first = sweep(small_dataset, [1, 2, 3], 2, base_seed=4, config=sweep_config)
    second = sweep(small_dataset, [1, 2, 3], 2, base_seed=4, config=sweep_config)
    assert first.entries == second.entries
    assert first.best == second.best
    assert len(first.entries) == 6


def test_process_executor_matches_local(small_dataset, sweep_config):
    local = sweep(small_dataset, [1, 2], 2, base_seed=5, config=sweep_config)
    pooled = sweep(
        small_dataset,
        [1, 2],
        2,
        base_seed=5,
        config=sweep_config,
        executor="process",
        workers=2,
    )
    assert pooled.entries == local.entries
    assert pooled.best == local.best


def test_sweep_rejects_empty_dataset(small_dataset, sweep_config):
    with pytest.raises(InvalidArgumentError):
        sweep(small_dataset.take(slice(0, 0)), [1], 1, config=sweep_config)


def test_exports(tmp_path):
    report = build_report(
        [
            entry(1, 0, 0, -12.0),
            entry(2, 0, 0, -9.5),
            entry(2, 0, 1, float("nan"), converged=False, failed=True),
        ],
        base_seed=11,
        restarts_per_topology=2,
    )
    write_runs_csv(report, tmp_path / "runs.csv")
    write_ockham_csv(report, tmp_path / "ockham.csv")

    with open(tmp_path / "runs.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 3
    assert rows[2]["failed"] == "true"
    assert rows[0]["converged"] == "true"
    assert float(rows[1]["final_bound"]) == -9.5

    with open(tmp_path / "ockham.csv", newline="") as handle:
        curve = list(csv.DictReader(handle))
    assert [row["topology"] for row in curve] == ["E", "(E,E)"]

    summary = summary_document(report)
    assert summary.best.topology == "(E,E)"
    assert summary.num_failed == 1
    assert summary.expert_range == [1, 2]
    document = json.loads(summary.model_dump_json())
    assert document["base_seed"] == 11
    assert document["model_weights"]["(E,E)"] == pytest.approx(1.0)
