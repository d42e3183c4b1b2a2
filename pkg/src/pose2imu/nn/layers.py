"""Residual dilated-convolution (TCN) network with per-timestep outputs."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .autograd import Tensor, add, conv1d_same, dropout, relu


@dataclass
class Topology:
    in_channels: int
    out_channels: int
    widths: tuple[int, ...] = (64, 64, 64, 32)
    kernels: tuple[int, ...] = (3, 3, 3, 1)
    dilations: tuple[int, ...] = (1, 2, 4, 8)
    dropout: float = 0.2
    # blocks with index >= this get dropout
    dropout_from: int = 1

    def __post_init__(self):
        self.widths = tuple(int(v) for v in self.widths)
        self.kernels = tuple(int(v) for v in self.kernels)
        self.dilations = tuple(int(v) for v in self.dilations)
        if not (len(self.widths) == len(self.kernels) == len(self.dilations)):
            raise ValueError("widths, kernels and dilations must have equal length")
        if any(k % 2 == 0 for k in self.kernels):
            raise ValueError("kernel widths must be odd")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self):
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _he(rng, shape, dtype):
    fan_in = shape[0] * shape[1]
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class TCN:
    """Stack of residual blocks followed by a width-1 output convolution.

    Each block: conv -> relu -> dropout -> conv -> relu -> dropout, added to
    the block input (projected by a width-1 conv when widths differ).
    """

    def __init__(self, topology: Topology, seed: int = 0, dtype=np.float32):
        self.topology = topology
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        p = OrderedDict()
        c_in = topology.in_channels
        for i, (c, k) in enumerate(zip(topology.widths, topology.kernels)):
            p[f"block{i}.conv1.w"] = _he(rng, (k, c_in, c), dtype)
            p[f"block{i}.conv1.b"] = np.zeros(c, dtype)
            p[f"block{i}.conv2.w"] = _he(rng, (k, c, c), dtype)
            p[f"block{i}.conv2.b"] = np.zeros(c, dtype)
            if c_in != c:
                p[f"block{i}.proj.w"] = _he(rng, (1, c_in, c), dtype)
                p[f"block{i}.proj.b"] = np.zeros(c, dtype)
            c_in = c
        p["head.w"] = _he(rng, (1, c_in, topology.out_channels), dtype)
        p["head.b"] = np.zeros(topology.out_channels, dtype)
        self.params = OrderedDict((k, Tensor(v, requires_grad=True)) for k, v in p.items())

    def parameters(self):
        return self.params

    def n_parameters(self):
        return sum(t.data.size for t in self.params.values())

    def state(self):
        return OrderedDict((k, t.data.copy()) for k, t in self.params.items())

    def load_state(self, state):
        for k, t in self.params.items():
            if state[k].shape != t.data.shape:
                raise ValueError(f"parameter {k}: shape {state[k].shape} != {t.data.shape}")
            t.data = np.array(state[k], dtype=self.dtype, copy=True)

    def block(self, i, x, train=False, rng=None, masks=None):
        topo = self.topology
        p = self.params
        d = topo.dilations[i]
        rate = topo.dropout if (train and i >= topo.dropout_from) else 0.0
        h = relu(conv1d_same(x, p[f"block{i}.conv1.w"], p[f"block{i}.conv1.b"], d))
        h = dropout(h, rate, rng, None if masks is None else masks.get((i, 0)))
        h = relu(conv1d_same(h, p[f"block{i}.conv2.w"], p[f"block{i}.conv2.b"], d))
        h = dropout(h, rate, rng, None if masks is None else masks.get((i, 1)))
        if f"block{i}.proj.w" in p:
            res = conv1d_same(x, p[f"block{i}.proj.w"], p[f"block{i}.proj.b"], 1)
        else:
            res = x
        return add(res, h)

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None,
                masks=None) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        if x.data.ndim == 2:
            x = Tensor(x.data[None])
        for i in range(len(self.topology.widths)):
            x = self.block(i, x, train, rng, masks)
        return conv1d_same(x, self.params["head.w"], self.params["head.b"], 1)

    def predict(self, x, batch_size: int = 512) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        outs = [self.forward(x[i:i + batch_size]).data for i in range(0, len(x), batch_size)]
        if not outs:
            return np.zeros((0, x.shape[1], self.topology.out_channels), self.dtype)
        return np.concatenate(outs)
