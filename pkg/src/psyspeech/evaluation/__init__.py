"""Cross-validated evaluation: folds, metrics, the experiment grid and figures."""

from .config import ConfigError, defaults, load_config, resolve_config
from .cv import FoldPlan, TaskSpec, grouped_kfold, make_task, random_oversample
from .experiment import MetricsReport, cell_seed, run, run_experiment, write_report
from .features import DataError
from .metrics import accuracy, auc_pairs, auc_trapezoid, confusion, roc_auc, roc_curve

__all__ = [
    "ConfigError", "DataError", "FoldPlan", "MetricsReport", "TaskSpec", "accuracy", "auc_pairs",
    "auc_trapezoid", "cell_seed", "confusion", "defaults", "grouped_kfold", "load_config",
    "make_task", "random_oversample", "resolve_config", "roc_auc", "roc_curve", "run",
    "run_experiment", "write_report",
]
