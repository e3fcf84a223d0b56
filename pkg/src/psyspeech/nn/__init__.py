from .gradcheck import GradCheckReport, grad_check
from .layers import conv2d_forward, lstm_forward, sigmoid, softmax
from .networks import (
    AttentionLstm,
    ConvLstmClassifier,
    DocFusionNet,
    LstmClassifier,
    Network,
    SegFusionNet,
)
from .train import TrainConfig, TrainingDiverged, TrainResult, train

__all__ = [
    "AttentionLstm", "ConvLstmClassifier", "DocFusionNet", "GradCheckReport", "LstmClassifier",
    "Network", "SegFusionNet", "TrainConfig", "TrainResult", "TrainingDiverged",
    "conv2d_forward", "grad_check", "lstm_forward", "sigmoid", "softmax", "train",
]
