from .autograd import (Tensor, add, conv1d_same, dropout, mse_loss, mul, relu,
                       softmax_cross_entropy, total)
from .checkpoint import CheckpointError, pack, unpack
from .layers import TCN, Topology
from .optim import Adam
from .training import (EarlyStopping, History, TrainConfig, TrainingDivergedError,
                       dataset_loss, train_loop)

__all__ = [
    "Tensor", "add", "conv1d_same", "dropout", "mse_loss", "mul", "relu",
    "softmax_cross_entropy", "total", "CheckpointError", "pack", "unpack", "TCN",
    "Topology", "Adam", "EarlyStopping", "History", "TrainConfig",
    "TrainingDivergedError", "dataset_loss", "train_loop",
]
