"""Predictive coding networks and graphs with masked topologies.

Layered models (``pcn``) and flat graph models (``pcg``) minimize the
same squared-prediction-error energy; ``fnn`` provides the feedforward
reference they are equivalent to at test time, ``topology`` builds
block-structured connectivity masks, and ``verify`` makes the
equivalences executable. ``PredictiveCodingClassifier`` wraps training
behind the scikit-learn estimator API; the ``pcgraph`` CLI drives
config-based runs.
"""

from . import datasets, fnn, pcg, pcn, topology, training, verify
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .core import (
    ACTIVATION_MATRIX,
    ACTIVATIONS,
    MATRIX_ACTIVATION,
    Activation,
    DivergenceError,
    LayerSpec,
    MaddCounter,
    activation,
    flat_to_layer,
    layer_offsets,
    layer_to_flat,
)
from .estimator import PredictiveCodingClassifier
from .fnn import FnnModel
from .harness import evaluate_checkpoint, train_from_config
from .pcg import FeedforwardInitError, PcgModel, PcgState, extract_pcn, hierarchical_embed
from .pcn import InferenceConfig, PcnModel, PcnState
from .topology import ConnectionKind, CostReport, build_mask, cost_report

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "ACTIVATION_MATRIX",
    "Activation",
    "activation",
    "build_mask",
    "Checkpoint",
    "ConfigError",
    "ConnectionKind",
    "cost_report",
    "CostReport",
    "datasets",
    "DivergenceError",
    "evaluate_checkpoint",
    "extract_pcn",
    "FeedforwardInitError",
    "flat_to_layer",
    "fnn",
    "FnnModel",
    "hierarchical_embed",
    "InferenceConfig",
    "layer_offsets",
    "layer_to_flat",
    "LayerSpec",
    "load_checkpoint",
    "load_config",
    "MaddCounter",
    "MATRIX_ACTIVATION",
    "pcg",
    "PcgModel",
    "PcgState",
    "pcn",
    "PcnModel",
    "PcnState",
    "PredictiveCodingClassifier",
    "RunConfig",
    "save_checkpoint",
    "topology",
    "train_from_config",
    "training",
    "verify",
]
