"""Forecast and imputation evaluation on downstream scenarios."""

from app.evaluation.forecast import ForecastRequest, gan_forecast, mean_forecast
from app.evaluation.harness import EvalModel, per_window_csv, run_scenario_eval
from app.evaluation.impute import gan_impute, impute_values, moving_average_impute
from app.evaluation.metrics import nrmse, pearson, spearman
from app.evaluation.schemas import EvalReport, EvalSummary

__all__ = [
    "EvalModel",
    "EvalReport",
    "EvalSummary",
    "ForecastRequest",
    "gan_forecast",
    "gan_impute",
    "impute_values",
    "mean_forecast",
    "moving_average_impute",
    "nrmse",
    "pearson",
    "spearman",
    "per_window_csv",
    "run_scenario_eval",
]
