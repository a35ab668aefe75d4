"""Capacitive-sensor gesture recognition with an adaptive error corrector.

A compact PCA + KNN base classifier over 100-feature signal windows, wrapped
by per-error-group binary correctors whose thresholds are chosen at zero
false positives, so corrections never damage the base model's predictions.
"""

from .config import PipelineConfig
from .corrector import ErrorGroup, corrected_predict
from .errors import CapgestError
from .pipeline import (
    ModelBundle,
    bench_latency,
    cross_validate,
    evaluate,
    load_bundle,
    save_bundle,
    train_pipeline,
)
from .signals import GestureLabel, Recording, Sample, split_by_user
from .synth import GenConfig, build_sliding_dataset, gen_dataset

__version__ = "0.1.0"

__all__ = [
    "CapgestError",
    "ErrorGroup",
    "GenConfig",
    "GestureLabel",
    "ModelBundle",
    "PipelineConfig",
    "Recording",
    "Sample",
    "bench_latency",
    "build_sliding_dataset",
    "corrected_predict",
    "cross_validate",
    "evaluate",
    "gen_dataset",
    "load_bundle",
    "save_bundle",
    "split_by_user",
    "train_pipeline",
    "__version__",
]
