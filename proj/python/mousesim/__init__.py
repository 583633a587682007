"""Mouse-trajectory similarity scoring.

Thin Python layer over the C++ core. Sessions are (n, 4) float arrays of
t, x, y, button_down with coordinates already scaled to [0, 1].
"""

import json

from . import _mousesim
from ._mousesim import (
    EmbeddingModel,
    ExperimentConfig,
    ModelConfig,
    MousesimError,
    PreprocessConfig,
    Sample,
    SampleStore,
    SynthParams,
    build_instances,
    expand_sample,
    far_frr,
    frr_far_curve,
    kfold_split,
    load_log,
    positive_instances,
    preprocess_session,
    resolve_threshold,
    roc_auc,
    synth_population,
    synth_session,
    threshold_presets,
)

__all__ = [
    "EmbeddingModel",
    "ExperimentConfig",
    "ModelConfig",
    "MousesimError",
    "PreprocessConfig",
    "Sample",
    "SampleStore",
    "SynthParams",
    "build_instances",
    "detect",
    "expand_sample",
    "far_frr",
    "frr_far_curve",
    "kfold_split",
    "load_log",
    "positive_instances",
    "preprocess_session",
    "resolve_threshold",
    "roc_auc",
    "run_experiment",
    "synth_population",
    "synth_session",
    "threshold_presets",
    "train",
]


def train(config, train_instances, val_instances, store):
    """Train a model; returns (model, history dict)."""
    model, history = _mousesim.train(config, train_instances, val_instances, store)
    return model, json.loads(history)


def detect(model, record_a, record_b, config=None, threshold=0.5, k_pairs=8, seed=0):
    """Verdict dict for whether two sessions come from the same person."""
    config = config if config is not None else PreprocessConfig()
    return json.loads(_mousesim.detect(model, record_a, record_b, config, threshold, k_pairs, seed))


def run_experiment(store, config):
    """Run a protocol end to end; returns {"aggregate", "reports", "runs"}."""
    return json.loads(_mousesim.run_experiment(store, config))
