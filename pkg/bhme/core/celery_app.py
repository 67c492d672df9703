"""Celery app for fanning sweep runs out to workers (``SWEEP_EXECUTOR=celery``)."""

from celery import Celery

from bhme.core.config import settings

celery_app = Celery(
    "bhme",
    broker=settings.REDIS_URL,
    backend=settings.REDIS_URL,
)

# Payloads carry plain lists and dicts only; run entries come back the same way.
celery_app.conf.update(
    task_serializer="json",
    accept_content=["json"],
    result_serializer="json",
    timezone="UTC",
    enable_utc=True,
    task_track_started=True,
    # a run can take minutes; hand out one at a time and ack on completion
    task_acks_late=True,
    task_reject_on_worker_lost=True,
    worker_prefetch_multiplier=1,
    result_expires=24 * 3600,
)

celery_app.autodiscover_tasks(["bhme.tasks"])

import bhme.tasks.training  # noqa: E402, F401
