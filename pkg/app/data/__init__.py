"""Dataset ingestion, covariates, windows and downstream scenarios."""

from app.data.features import time_features
from app.data.panel import MinMaxScaler, SeriesPanel, load_panel, minmax_scale
from app.data.scenarios import (
    ScenarioDataset,
    make_augmentation_mix,
    make_augmentation_scenario,
    make_cold_start_scenario,
    make_far_forecast_scenario,
    make_stretch_scenario,
)
from app.data.synthetic import make_sinusoid_panel

__all__ = [
    "MinMaxScaler",
    "ScenarioDataset",
    "SeriesPanel",
    "load_panel",
    "make_augmentation_mix",
    "make_augmentation_scenario",
    "make_cold_start_scenario",
    "make_far_forecast_scenario",
    "make_sinusoid_panel",
    "make_stretch_scenario",
    "minmax_scale",
    "time_features",
]
