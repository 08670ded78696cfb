"""Adam with global-norm gradient clipping and the validation LR schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CLIP_NORM = 1.0
LR_DECAY_FACTOR = 4.0


class NonFiniteGradient(RuntimeError):
    """Raised when a gradient contains NaN or inf; the step is aborted."""


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float = CLIP_NORM):
    """Rescale all gradients jointly so their global L2 norm is <= max_norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        grads = {name: g * scale for name, g in grads.items()}
    return grads, norm


@dataclass
class AdamState:
    """First/second moment estimates plus the step counter."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(state: AdamState, params, grads: dict[str, np.ndarray]) -> None:
    """One bias-corrected Adam step, clipping the global norm first.

    ``params`` is a ParamStore; parameter arrays are updated in place so
    graph leaves stay valid across steps.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name!r}")
    grads, _ = clip_global_norm(grads)
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, g in grads.items():
        node = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(node.data)
            state.v[name] = np.zeros_like(node.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        node.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass
class LRSchedule:
    """Divide the learning rate by 4 whenever validation fails to improve.

    Patience is one epoch: any epoch without strictly better validation
    score triggers a decay. Training stops once the rate has been divided
    ``max_decays`` times without an intervening improvement.
    """

    best: float = np.inf
    decays: int = 0
    max_decays: int = 4

    def observe(self, state: AdamState, val_score: float) -> bool:
        """Record one epoch's validation score; returns True to keep going."""
        if val_score < self.best:
            self.best = val_score
            self.decays = 0
            return True
        state.lr /= LR_DECAY_FACTOR
        self.decays += 1
        return self.decays < self.max_decays
