"""Graph clustering by gradient descent on a differentiable map equation."""

from .flow import FlowModel, build_flow
from .graph import FeatureMatrix, Graph, GraphFormatError, Partition, identity_features, load_edge_list
from .mapequation import (
    Codelength,
    brute_force_optimum,
    codelength_entropy_form,
    codelength_expanded_form,
    codelength_soft,
)
from .metrics import ami
from .neural import EncoderConfig
from .training import TrainConfig, TrainedResult, train, train_trials

__version__ = "0.1.0"

__all__ = [
    "Codelength",
    "EncoderConfig",
    "FeatureMatrix",
    "FlowModel",
    "Graph",
    "GraphFormatError",
    "Partition",
    "TrainConfig",
    "TrainedResult",
    "ami",
    "brute_force_optimum",
    "build_flow",
    "codelength_entropy_form",
    "codelength_expanded_form",
    "codelength_soft",
    "identity_features",
    "load_edge_list",
    "train",
    "train_trials",
]
