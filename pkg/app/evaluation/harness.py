"""Rolling-window NRMSE evaluation of generators and baselines on a scenario."""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd

from app.data.scenarios import ScenarioDataset
from app.data.windows import history
from app.errors import UndefinedMetricError
from app.evaluation.forecast import HORIZON, ForecastRequest, gan_forecast, mean_forecast
from app.evaluation.impute import moving_average_impute
from app.evaluation.metrics import nrmse, pearson, spearman
from app.evaluation.schemas import EvalReport, EvalSummary, ModelSummary
from app.gan.sampling import GanSampler
from app.runs.schemas import RunStatus

__all__ = [
    "BASELINES",
    "EvalModel",
    "evaluate_model",
    "forecast_window",
    "per_window_csv",
    "run_scenario_eval",
]

logger = logging.getLogger(__name__)

BASELINES = ("moving_average", "mean")


@dataclass
class EvalModel:
    """A named forecaster: a frozen generator or one of the baselines."""

    name: str
    kind: Literal["gan", "moving_average", "mean"]
    sampler: GanSampler | None = None


def _evaluated_series(scenario: ScenarioDataset) -> list[int]:
    if scenario.kind == "cold_start":
        return scenario.cold_start
    return list(range(scenario.panel.n_series))


def forecast_window(
    model: EvalModel,
    scenario: ScenarioDataset,
    start: int,
    seed: int,
    n_samples: int = 100,
    horizon: int = HORIZON,
) -> tuple[np.ndarray, np.ndarray]:
    """(forecast, target) arrays of shape (series, horizon) for one rolling window."""
    values = scenario.panel.raw_values()
    observed = scenario.observed_before(start)
    series = _evaluated_series(scenario)
    stop = start + horizon
    target = values[series, start:stop]

    if model.kind == "moving_average":
        completed = moving_average_impute(values[:, :stop], observed[:, :stop])
        return completed[series, start:stop], target

    forecasts = []
    for i in series:
        request = ForecastRequest(series=i, start=start, horizon=horizon)
        if model.kind == "mean":
            forecasts.append(mean_forecast(values, observed, request))
            continue
        if model.sampler.context_length:
            request.context = history(
                values, observed, np.array([i]), np.array([start]), model.sampler.context_length
            )[0]
        forecasts.append(gan_forecast(model.sampler, request, n_samples, seed))
    return np.vstack(forecasts), target


def evaluate_model(
    model: EvalModel,
    scenario: ScenarioDataset,
    seed: int,
    n_samples: int = 100,
    horizon: int = HORIZON,
    scenario_ref: str | None = None,
) -> EvalReport:
    per_window = []
    for start in scenario.forecast_starts:
        forecast, target = forecast_window(model, scenario, start, seed, n_samples, horizon)
        per_window.append(nrmse(forecast, target))
    logger.info(
        f"{model.name} seed {seed}: NRMSE by window {np.round(per_window, 4).tolist()}"
    )
    return EvalReport(
        model=model.name,
        seed=seed,
        scenario_kind=scenario.kind,
        scenario_ref=scenario_ref,
        forecast_starts=scenario.forecast_starts,
        per_window=per_window,
        aggregate=float(np.mean(per_window)),
    )


def _summarize(
    model: EvalModel, reports: list[EvalReport], fid: float | None
) -> ModelSummary | None:
    done = [r for r in reports if r.model == model.name and r.status == RunStatus.COMPLETED]
    if not done:
        return None
    aggregates = [r.aggregate for r in done]
    return ModelSummary(
        model=model.name,
        seeds=[r.seed for r in done],
        aggregates=aggregates,
        mean=float(np.mean(aggregates)),
        std=float(np.std(aggregates)),
        per_window_mean=np.mean([r.per_window for r in done], axis=0).tolist(),
        context_fid=fid,
    )


def _fid_correlations(summaries: list[ModelSummary]) -> tuple[float | None, float | None]:
    """Pearson and Spearman correlation of Context-FID with mean NRMSE across scored models."""
    scored = [s for s in summaries if s.context_fid is not None]
    if len(scored) < 2:  # noqa: PLR2004
        return None, None
    fids = [s.context_fid for s in scored]
    errors = [s.mean for s in scored]
    try:
        return pearson(fids, errors), spearman(fids, errors)
    except UndefinedMetricError:
        logger.warning("Context-FID/NRMSE correlation undefined for constant inputs")
        return None, None


def run_scenario_eval(
    scenario: ScenarioDataset,
    models: list[EvalModel],
    seeds: list[int],
    n_samples: int = 100,
    horizon: int = HORIZON,
    workers: int = 1,
    scenario_ref: str | None = None,
    fid_scores: dict[str, float] | None = None,
) -> EvalSummary:
    """
    Evaluate every (model, seed) pair in a worker pool.

    A failing pair becomes a failure record; the others still report.
    """
    fid_scores = fid_scores or {}
    pairs = [(model, seed) for model in models for seed in seeds]
    reports: list[EvalReport] = []

    def run(pair: tuple[EvalModel, int]) -> EvalReport:
        model, seed = pair
        return evaluate_model(model, scenario, seed, n_samples, horizon, scenario_ref)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = {executor.submit(run, pair): pair for pair in pairs}
        for future in as_completed(futures):
            model, seed = futures[future]
            try:
                reports.append(future.result())
            except Exception as e:
                logger.exception(f"Evaluation of {model.name} with seed {seed} failed")
                reports.append(
                    EvalReport(
                        model=model.name,
                        seed=seed,
                        scenario_kind=scenario.kind,
                        scenario_ref=scenario_ref,
                        status=RunStatus.FAILED,
                        error=str(e),
                    )
                )

    order = {(model.name, seed): i for i, (model, seed) in enumerate(pairs)}
    reports.sort(key=lambda r: order[(r.model, r.seed)])
    summaries = [s for m in models if (s := _summarize(m, reports, fid_scores.get(m.name)))]

    linear, rank = _fid_correlations(summaries)
    return EvalSummary(
        scenario_kind=scenario.kind,
        scenario_ref=scenario_ref,
        reports=reports,
        models=summaries,
        failures=[r for r in reports if r.status == RunStatus.FAILED],
        fid_nrmse_pearson=linear,
        fid_nrmse_spearman=rank,
    )


def per_window_csv(summary: EvalSummary) -> str:
    """Long-format per-window NRMSE (model, seed, window, start, nrmse) for plotting."""
    rows = [
        {"model": r.model, "seed": r.seed, "window": w, "start": start, "nrmse": value}
        for r in summary.reports
        if r.status == RunStatus.COMPLETED
        for w, (start, value) in enumerate(zip(r.forecast_starts, r.per_window, strict=True))
    ]
    frame = pd.DataFrame(rows, columns=["model", "seed", "window", "start", "nrmse"])
    return frame.to_csv(index=False)
