from pydantic import BaseModel

from app.runs.schemas import RunStatus

__all__ = ["EvalReport", "EvalSummary", "ModelSummary"]


class EvalReport(BaseModel):
    """NRMSE of one (model, seed) pair over a scenario's rolling windows."""

    model: str
    seed: int
    scenario_kind: str
    scenario_ref: str | None = None
    forecast_starts: list[int] = []
    per_window: list[float] = []
    aggregate: float | None = None
    status: RunStatus = RunStatus.COMPLETED
    error: str | None = None


class ModelSummary(BaseModel):
    model: str
    seeds: list[int]
    aggregates: list[float]
    mean: float
    std: float
    per_window_mean: list[float]
    context_fid: float | None = None


class EvalSummary(BaseModel):
    scenario_kind: str
    scenario_ref: str | None = None
    reports: list[EvalReport]
    models: list[ModelSummary]
    failures: list[EvalReport] = []
    fid_nrmse_pearson: float | None = None
    fid_nrmse_spearman: float | None = None

    @property
    def failed(self) -> bool:
        return bool(self.failures)
