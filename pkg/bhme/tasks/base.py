"""Base task class for sweep runs."""

import logging

from celery import Task

from bhme.core.config import settings
from bhme.core.errors import HmeError

logger = logging.getLogger(__name__)


class HmeTask(Task):
    """Base task for training runs.

    Library errors (bad arguments, bad data) are deterministic and are not
    retried; anything else, typically a lost worker or broker hiccup, is
    retried up to ``CELERY_TASK_MAX_RETRIES`` times.
    """

    abstract = True
    autoretry_for = (Exception,)
    dont_autoretry_for = (HmeError,)
    max_retries = settings.CELERY_TASK_MAX_RETRIES
    default_retry_delay = settings.CELERY_TASK_RETRY_DELAY

    @staticmethod
    def describe(args, kwargs) -> str:
        """Short run label (topology and restart) for log lines."""
        spec = kwargs.get("spec") or (args[0] if args else None)
        if isinstance(spec, dict):
            return f"{spec.get('topology')} restart {spec.get('restart')}"
        return "unknown run"

    # ---- Celery callback hooks ------------------------------------------

    def on_failure(self, exc, task_id, args, kwargs, einfo):
        """Called when the task fails after all retries are exhausted."""
        logger.error(
            "Task %s (%s) failed: %s", self.name, self.describe(args, kwargs), exc
        )

    def on_retry(self, exc, task_id, args, kwargs, einfo):
        """Called when the task is about to be retried."""
        logger.warning(
            "Task %s (%s) retrying: %s", self.name, self.describe(args, kwargs), exc
        )
