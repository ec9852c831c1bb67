"""Reconstruction of colorized underdrawings by Gram-matrix style
transfer over a VGG-19-shaped feature extractor."""

from .errors import (
    ConfigurationError,
    FormatError,
    GhostlayerError,
    NumericError,
    UsageError,
    ValidationError,
)
from .losses import GramMatrix, LossBreakdown, LossConfig
from .network import FeatureMap, NetworkSpec, WeightSet, load_weights, save_weights, vgg19_spec
from .optim import OptimizerConfig, OptimizationState
from .pipeline import PreprocessConfig, RunReport, TransferJob, run_job

__version__ = "0.1.0"
