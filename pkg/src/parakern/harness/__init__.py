from .config import ExperimentConfig, build_field, build_grid
from .experiments import REGISTRY, estimate_ratio, run_experiment
from .report import ExperimentReport

__all__ = ["ExperimentConfig", "ExperimentReport", "REGISTRY", "build_field",
           "build_grid", "estimate_ratio", "run_experiment"]
