"""Neuron ranking and analysis for linear probing classifiers."""

from ._core import (
    Corpus,
    LcaError,
    Manifest,
    Probe,
    Ranking,
    Splits,
    __version__,
    cli,
    control_labels,
    extract_ordering,
    grid_search,
    layer_histogram,
    load_probe,
    load_splits,
    mask_accuracy,
    minimal_selection,
    run_pipeline,
    score_lambdas,
    top_neurons_for_tag,
    train_probe,
    write_planted_corpus,
)

__all__ = [
    "Corpus",
    "LcaError",
    "Manifest",
    "Probe",
    "Ranking",
    "Splits",
    "__version__",
    "cli",
    "control_labels",
    "extract_ordering",
    "grid_search",
    "layer_histogram",
    "load_probe",
    "load_splits",
    "mask_accuracy",
    "minimal_selection",
    "run_pipeline",
    "score_lambdas",
    "top_neurons_for_tag",
    "train_probe",
    "write_planted_corpus",
]
