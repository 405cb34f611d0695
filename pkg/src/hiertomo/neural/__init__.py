from .layers import AvgPool, Conv2D, Dense, Flatten, LayerError, MaxPool, Network
from .specs import ARCHS, build_network, measurements_to_input
from .training import (
    AdamState,
    Model,
    TrainingError,
    adam_step,
    build_model_input,
    infer,
    loss_l2,
    loss_l2_grad,
    train,
    weight_penalty,
)

__all__ = [
    "AvgPool", "Conv2D", "Dense", "Flatten", "LayerError", "MaxPool", "Network",
    "ARCHS", "build_network", "measurements_to_input",
    "AdamState", "Model", "TrainingError", "adam_step", "build_model_input",
    "infer", "loss_l2", "loss_l2_grad", "train", "weight_penalty",
]
