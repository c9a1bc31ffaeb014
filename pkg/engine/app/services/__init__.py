from .confset import build_confidence_set, summarize
from .effects import marginal_effects
from .simharness import ExperimentRunner, run_experiment

__all__ = [
    "ExperimentRunner",
    "build_confidence_set",
    "marginal_effects",
    "run_experiment",
    "summarize",
]
