"""Token classifier backends: a from-scratch transformer and a file replay."""

from .network import (
    ClassifierConfig,
    TokenClassifier,
    ce_loss_and_dlogits,
    labels_to_indices,
    softmax,
    weighted_ce_loss,
)
from .replay import ReplayBackend, read_probability_data, write_probability_file
from .training import (
    Adam,
    TrainConfig,
    TrainedModel,
    default_class_weights,
    load_checkpoint,
    save_checkpoint,
    train,
    validation_f1,
)

__all__ = [
    "ClassifierConfig", "TokenClassifier", "softmax", "weighted_ce_loss",
    "ce_loss_and_dlogits", "labels_to_indices",
    "ReplayBackend", "read_probability_data", "write_probability_file",
    "Adam", "TrainConfig", "TrainedModel", "default_class_weights",
    "train", "validation_f1", "save_checkpoint", "load_checkpoint",
]
