"""Mini-batch training with Adam and patience-based early stopping."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .autograd import mse_loss, softmax_cross_entropy
from .optim import Adam

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    max_epochs: int = 500
    patience: int = 25
    batch_size: int = 64
    seed: int = 0
    loss: str = "mse"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.loss not in ("mse", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if not 0 < self.patience < self.max_epochs:
            raise ValueError("patience must be positive and below max_epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self):
        return asdict(self)


class EarlyStopping:
    """Tracks the best validation loss; signals a stop after `patience` stale epochs."""

    def __init__(self, patience=25):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.counter = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; returns True if this epoch is the new best."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.counter = 0
            return True
        self.counter += 1
        return False

    @property
    def should_stop(self):
        return self.counter >= self.patience


def loss_fn(kind):
    return mse_loss if kind == "mse" else softmax_cross_entropy


def dataset_loss(model, x, y, kind, batch_size=512) -> float:
    """Mean loss over a dataset in inference mode."""
    fn = loss_fn(kind)
    total, count = 0.0, 0
    for i in range(0, len(x), batch_size):
        xb, yb = x[i:i + batch_size], y[i:i + batch_size]
        out = model.forward(xb, train=False)
        total += float(fn(out, yb).data) * len(xb)
        count += len(xb)
    return total / count


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def to_dict(self):
        return asdict(self)


def train_loop(model, train, val, config: TrainConfig, evaluate=None):
    """Fit ``model`` in place and restore the parameters of the best validation epoch.

    ``train`` and ``val`` are (inputs, targets) pairs. ``evaluate(model, epoch)``
    overrides the validation loss computation when given. Epochs count from 1.
    """
    xtr, ytr = train
    xva, yva = val
    if len(xtr) == 0 or len(xva) == 0:
        raise ValueError("train and validation sets must be non-empty")
    fn = loss_fn(config.loss)
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.eps)
    stopper = EarlyStopping(config.patience)
    hist = History()
    best_state = model.state()
    n = len(xtr)
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        run, seen = 0.0, 0
        for i in range(0, n, config.batch_size):
            idx = perm[i:i + config.batch_size]
            opt.zero_grad()
            loss = fn(model.forward(xtr[idx], train=True, rng=rng), ytr[idx])
            lv = float(loss.data)
            if not math.isfinite(lv):
                raise TrainingDivergedError(epoch)
            loss.backward()
            opt.step()
            run += lv * len(idx)
            seen += len(idx)
        hist.train_loss.append(run / seen)
        vl = evaluate(model, epoch) if evaluate else dataset_loss(model, xva, yva, config.loss)
        if not math.isfinite(vl):
            raise TrainingDivergedError(epoch)
        hist.val_loss.append(vl)
        if stopper.update(epoch, vl):
            best_state = model.state()
        log.debug("epoch %d train %.5g val %.5g", epoch, hist.train_loss[-1], vl)
        hist.stopped_epoch = epoch
        if stopper.should_stop:
            break
    hist.best_epoch = stopper.best_epoch
    model.load_state(best_state)
    return model, hist
