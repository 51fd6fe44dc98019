"""Model registry, fit/predict front end, boosted trees, and networks."""

from .boosting import BoostedTrees
from .estimators import (FittedModel, build_network, fit, fit_dummy,
                         frozen_network_baseline, load_model, predict,
                         save_model, validate_params)
from .network import ARCHITECTURES, FeedForwardNet, NNArchitecture, \
    frozen_network, get_architecture
from .registry import (CLASSIFICATION, REGRESSION, ModelSpec, get_spec,
                       registry, specs_for_task)

__all__ = [
    "ARCHITECTURES", "BoostedTrees", "CLASSIFICATION", "FeedForwardNet",
    "FittedModel", "ModelSpec", "NNArchitecture", "REGRESSION",
    "build_network", "fit", "fit_dummy", "frozen_network",
    "frozen_network_baseline", "get_architecture", "get_spec", "load_model",
    "predict", "registry", "save_model", "specs_for_task", "validate_params",
]
