"""The Celery task that runs one training job of a sweep."""

from dataclasses import asdict

from bhme.core.selection import RunEntry, plan_runs, run_one
from bhme.core.serialization import dataset_payload, training_config_payload
from bhme.tasks.base import HmeTask
from bhme.tasks.training import train_topology_run


def test_task_matches_local_run(toy_dataset, fast_config):
    spec = plan_runs([2], 1, base_seed=1)[0]
    result = train_topology_run.apply(
        args=(
            asdict(spec),
            dataset_payload(toy_dataset),
            training_config_payload(fast_config),
        )
    ).get()
    assert RunEntry(**result) == run_one(spec, toy_dataset, fast_config)


def test_task_is_registered_by_name():
    assert train_topology_run.name == "tasks.train_topology_run"


def test_describe():
    spec = {"topology": "(E,E)", "restart": 3}
    assert HmeTask.describe((spec,), {}) == "(E,E) restart 3"
    assert HmeTask.describe((), {"spec": spec}) == "(E,E) restart 3"
    assert HmeTask.describe((), {}) == "unknown run"
