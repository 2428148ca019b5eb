from .layers import dense_forward, lstm_step
from .models import Architecture, LayerSpec, ModelSpec, Network, build_spec
from .train import Adam, TrainConfig, TrainResult, default_train_config, loss_and_grads, train

__all__ = [
    "Adam",
    "Architecture",
    "LayerSpec",
    "ModelSpec",
    "Network",
    "TrainConfig",
    "TrainResult",
    "build_spec",
    "default_train_config",
    "dense_forward",
    "loss_and_grads",
    "lstm_step",
    "train",
]
