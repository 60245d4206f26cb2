"""Manifest-backed runs of the command-line operations.

Import the service from `app.runs.service`; this package only holds schemas.
"""

from app.runs.schemas import RunManifest, RunStatus

__all__ = ["RunManifest", "RunStatus"]
