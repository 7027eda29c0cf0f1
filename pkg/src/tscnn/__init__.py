"""Two-stream CNN decoding of hybrid motor imagery and SSVEP EEG, in numpy."""

from tscnn.data import Dataset, SynthConfig, load_dataset, save_dataset, synth_dataset
from tscnn.dsp import FilterSpec, design_butterworth_bandpass, filter_zero_phase
from tscnn.evaluation import compute_metrics, paired_t_test
from tscnn.interpret import dump_features, weight_ratio
from tscnn.nn import ModelConfig, ModelParams, load_checkpoint, save_checkpoint
from tscnn.train import TrainConfig, cross_validate

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FilterSpec",
    "ModelConfig",
    "ModelParams",
    "SynthConfig",
    "TrainConfig",
    "compute_metrics",
    "cross_validate",
    "design_butterworth_bandpass",
    "dump_features",
    "filter_zero_phase",
    "load_checkpoint",
    "load_dataset",
    "paired_t_test",
    "save_checkpoint",
    "save_dataset",
    "synth_dataset",
    "weight_ratio",
]
