"""Celery task wrapping one training run of a sweep."""

import logging
from dataclasses import asdict

from bhme.core.celery_app import celery_app
from bhme.core.selection import RunSpec, run_one
from bhme.core.serialization import dataset_from_payload, training_config_from_payload
from bhme.tasks.base import HmeTask

logger = logging.getLogger(__name__)


@celery_app.task(base=HmeTask, bind=True, name="tasks.train_topology_run")
def train_topology_run(self, spec: dict, dataset: dict, config: dict) -> dict:
    """Train ``spec`` on the JSON dataset payload; returns the run entry as a dict.

    Numerical failures come back as a failed entry rather than a task error,
    so one diverging restart never fails the whole group.
    """
    run = RunSpec(**spec)
    logger.info(
        "Task %s training %s restart %d", self.request.id, run.topology, run.restart
    )
    entry = run_one(
        run, dataset_from_payload(dataset), training_config_from_payload(config)
    )
    return asdict(entry)
