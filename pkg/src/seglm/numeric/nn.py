"""LSTM cell, MLP, and initialization/dropout helpers on the autodiff graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

INIT_RANGE = 0.08


@dataclass
class LSTMParams:
    """Input/recurrent weights and bias for the four gates, stacked.

    ``wx`` is (input_dim, 4H), ``wh`` is (H, 4H), ``b`` is (4H,); the gate
    order along the last axis is input, forget, cell, output.
    """

    wx: ad.Node
    wh: ad.Node
    b: ad.Node

    @property
    def hidden_size(self) -> int:
        return self.wh.data.shape[0]


def lstm_step(params: LSTMParams, x: ad.Node, h: ad.Node, c: ad.Node):
    """One LSTM cell update on a (B, input_dim) batch; returns (h', c')."""
    if x.data.shape[1] != params.wx.data.shape[0]:
        raise ValueError(
            f"input dim {x.data.shape[1]} != weight dim {params.wx.data.shape[0]}"
        )
    gates = ad.add(ad.add(ad.matmul(x, params.wx), ad.matmul(h, params.wh)), params.b)
    i, f, g, o = ad.split_cols(gates, 4)
    c_new = ad.add(ad.mul(ad.sigmoid(f), c), ad.mul(ad.sigmoid(i), ad.tanh(g)))
    h_new = ad.mul(ad.sigmoid(o), ad.tanh(c_new))
    return h_new, c_new


@dataclass
class MLPParams:
    """One hidden layer with tanh, then an affine output."""

    w1: ad.Node
    b1: ad.Node
    w2: ad.Node
    b2: ad.Node


def mlp(params: MLPParams, x: ad.Node) -> ad.Node:
    hidden = ad.tanh(ad.add(ad.matmul(x, params.w1), params.b1))
    return ad.add(ad.matmul(hidden, params.w2), params.b2)


def softmax(z: np.ndarray) -> np.ndarray:
    """Max-shifted softmax on a plain array (no graph)."""
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z, axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / np.sum(e, axis=-1, keepdims=True)


def logsigmoid(z: float) -> float:
    """log(sigma(z)), stable for |z| up to the float64 exp range."""
    return -float(np.logaddexp(0.0, -z))


def init_params(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-0.08, 0.08) initialization from the supplied generator."""
    return rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape)


def dropout(x: ad.Node, rate: float, train: bool, rng: np.random.Generator | None = None) -> ad.Node:
    """Inverted dropout: scale kept units by 1/(1-rate) in training mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout requires a generator")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return ad.mul(x, ad.constant(mask))


@dataclass
class ParamStore:
    """Named leaf nodes; the single owner of all learnable arrays."""

    params: dict[str, ad.Node] = field(default_factory=dict)

    def add(self, name: str, data: np.ndarray) -> ad.Node:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        node = ad.leaf(np.asarray(data, dtype=np.float64), name=name)
        self.params[name] = node
        return node

    def __getitem__(self, name: str) -> ad.Node:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self):
        return list(self.params)

    def zero_grad(self) -> None:
        for node in self.params.values():
            node.grad = None

    def gradients(self) -> dict[str, np.ndarray]:
        return {
            name: (node.grad if node.grad is not None else np.zeros_like(node.data))
            for name, node in self.params.items()
        }

    def state(self) -> dict[str, np.ndarray]:
        return {name: node.data for name, node in self.params.items()}
