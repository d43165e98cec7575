"""Federated LSTM demand forecasting for EV charging with attack injection,
autoencoder-based anomaly detection and interpolation filtering."""
from .config import ExperimentConfig, benchmark_config, load_config
from .experiment import build_scenarios, emit_reports, run_experiment, run_experiment_matrix
from .nncore import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ExperimentConfig",
    "benchmark_config",
    "build_scenarios",
    "emit_reports",
    "load_config",
    "run_experiment",
    "run_experiment_matrix",
]
