from enum import Enum

from pydantic import BaseModel

__all__ = ["RunManifest", "RunStatus"]


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class RunManifest(BaseModel):
    """
    Everything needed to re-run a command exactly.

    `config` is the full effective RunConfig; `input_hash` is a git-style blob
    hash over the config echo and the bytes of every input artifact.
    """

    command: str
    run_id: str
    run_dir: str
    config: dict
    seed: int
    input_hash: str
    inputs: dict[str, str] = {}
    outputs: list[str] = []
    flags: dict[str, bool | int] = {}
    status: RunStatus = RunStatus.PENDING
    error: str | None = None
