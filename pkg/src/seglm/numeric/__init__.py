"""Dense-array math: autodiff, LSTM/MLP blocks, Adam, and checkpoints."""

from . import autodiff
from .autodiff import Node, backward, constant, leaf, no_grad, set_debug_checks
from .checkpoint import (
    CheckpointError,
    load_checkpoint,
    rng_from_json,
    rng_state_to_json,
    save_checkpoint,
)
from .nn import (
    INIT_RANGE,
    LSTMParams,
    MLPParams,
    ParamStore,
    dropout,
    init_params,
    logsigmoid,
    lstm_step,
    mlp,
    softmax,
)
from .optim import (
    AdamState,
    LRSchedule,
    NonFiniteGradient,
    adam_update,
    clip_global_norm,
)

__all__ = [
    "autodiff",
    "Node",
    "backward",
    "constant",
    "leaf",
    "no_grad",
    "set_debug_checks",
    "CheckpointError",
    "load_checkpoint",
    "rng_from_json",
    "rng_state_to_json",
    "save_checkpoint",
    "INIT_RANGE",
    "LSTMParams",
    "MLPParams",
    "ParamStore",
    "dropout",
    "init_params",
    "logsigmoid",
    "lstm_step",
    "mlp",
    "softmax",
    "AdamState",
    "LRSchedule",
    "NonFiniteGradient",
    "adam_update",
    "clip_global_norm",
]
