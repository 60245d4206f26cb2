"""Stderr logging tagged with the active run and growth stage."""

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar

# command plus input-hash prefix, set when a run starts
run_context: ContextVar[str] = ContextVar("run_id", default="none")
stage_context: ContextVar[str] = ContextVar("stage", default="-")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [run:%(run_id)s stage:%(stage)s] - %(message)s"


@contextmanager
def log_stage(stage: int) -> Iterator[None]:
    """Tag records emitted inside the block with growth stage `stage`."""
    token = stage_context.set(str(stage))
    try:
        yield
    finally:
        stage_context.reset(token)


class RunContextFilter(logging.Filter):
    """Add run_id and stage to records that do not carry them already."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "run_id"):
            record.run_id = run_context.get()
        if not hasattr(record, "stage"):
            record.stage = stage_context.get()
        return True


def setup_logging(level: int | str = logging.INFO) -> None:
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers.clear()

    # stdout is reserved for artifact keys
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.addFilter(RunContextFilter())
    root_logger.addHandler(handler)
