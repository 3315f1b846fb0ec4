from .gradcheck import check_gradients
from .lstm import predict
from .params import ModelParams, initialize_params
from .trainer import TrainConfig, TrainHistory, train

__all__ = [
    "ModelParams",
    "TrainConfig",
    "TrainHistory",
    "check_gradients",
    "initialize_params",
    "predict",
    "train",
]
