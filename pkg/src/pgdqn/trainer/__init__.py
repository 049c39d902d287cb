"""Training: hyperparameters, learning rules and the main loop."""
from .config import PROFILES, Hyperparameters, apply_overrides, config_hash, parse_override, profile
from .core import (
    TemperatureState,
    TrainingAborted,
    frozen_advantage,
    preference_objective,
    preference_update,
    q_loss_and_grads,
    q_target_value,
    q_update,
    temperature_update,
)
from .loop import RUNLOG_COLUMNS, RunLog, evaluate_greedy, read_runlog_csv, run_stem, streams, train

__all__ = [
    "Hyperparameters", "PROFILES", "RUNLOG_COLUMNS", "RunLog", "TemperatureState", "TrainingAborted",
    "apply_overrides", "config_hash", "evaluate_greedy", "frozen_advantage", "parse_override",
    "preference_objective", "preference_update", "profile", "q_loss_and_grads", "q_target_value",
    "q_update", "read_runlog_csv", "run_stem", "streams", "temperature_update", "train",
]
