"""Event detectors learned from temporally imprecise event marks.

The training objective is the exact marginal likelihood of the observed
event timestamps, with instance labels, per-instance emission counts, and
timestamp-to-instance assignments summed out by a forward/backward dynamic
program.  The fitted classifier stands alone at prediction time.
"""

__version__ = "0.1.0"

from .baselines import naive_align, train_mi, train_naive, train_supervised
from .data import Dataset, LoadError, Session, load_dataset, median_spacing, save_dataset
from .evaluation import MethodSpec, cross_validate, score, train_method
from .learning import FitConfig, FitError, default_init, fit, predict_labels
from .model import ModelParams, init_params, load_model, save_model
from .synth import GenConfig, NoiseConfig, gen_sessions, inject_noise, inject_noise_dataset

__all__ = [
    "__version__",
    "Dataset",
    "FitConfig",
    "FitError",
    "GenConfig",
    "LoadError",
    "MethodSpec",
    "ModelParams",
    "NoiseConfig",
    "Session",
    "cross_validate",
    "default_init",
    "fit",
    "gen_sessions",
    "init_params",
    "inject_noise",
    "inject_noise_dataset",
    "load_dataset",
    "load_model",
    "median_spacing",
    "naive_align",
    "predict_labels",
    "save_dataset",
    "save_model",
    "score",
    "train_method",
    "train_mi",
    "train_naive",
    "train_supervised",
]
