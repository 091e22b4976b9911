"""Parameter update rules: SGD with momentum, ADAM, RMSprop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ContractError, DivergenceError

ALGORITHMS = ("sgd", "adam", "rmsprop")


@dataclass
class OptimizerState:
    """Moment buffers and step counter for one parameter set.

    Buffers are created lazily on the first step so the state can be built
    before parameter shapes are known.
    """

    algorithm: str
    lr: float
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    rms_decay: float = 0.99
    eps: float = 1e-8
    step_count: int = 0
    slots: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ContractError(f"unknown optimizer algorithm {self.algorithm!r}")

    def _slot(self, name: str, key: str, like: np.ndarray) -> np.ndarray:
        buf = self.slots.setdefault(name, {})
        if key not in buf:
            buf[key] = np.zeros_like(like)
        elif buf[key].shape != like.shape:
            raise ContractError(
                f"optimizer slot {name}/{key} has shape {buf[key].shape}, parameter has {like.shape}"
            )
        return buf[key]


def optimizer_step(state: OptimizerState, params: dict[str, Tensor]) -> OptimizerState:
    """Apply one in-place update using each parameter's `.grad` buffer.

    Raises DivergenceError (naming the parameter) when a gradient contains
    NaN/Inf; the step is aborted before any parameter is touched.
    """
    grads = {}
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"optimizer_step: parameter {name!r} has no gradient")
        if not np.isfinite(p.grad).all():
            raise DivergenceError(f"non-finite gradient in parameter {name!r}; step aborted")
        grads[name] = p.grad

    state.step_count += 1
    t = state.step_count
    for name, p in params.items():
        g = grads[name]
        w = p.data
        if state.algorithm == "sgd":
            v = state._slot(name, "v", w)
            if state.momentum != 0.0:
                v *= state.momentum
                v += g
            else:
                v[...] = g
            w -= state.lr * v
        elif state.algorithm == "adam":
            m = state._slot(name, "m", w)
            v = state._slot(name, "v", w)
            m *= state.beta1
            m += (1 - state.beta1) * g
            v *= state.beta2
            v += (1 - state.beta2) * (g * g)
            mhat = m / (1 - state.beta1**t)
            vhat = v / (1 - state.beta2**t)
            w -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
        else:  # rmsprop
            sq = state._slot(name, "sq", w)
            sq *= state.rms_decay
            sq += (1 - state.rms_decay) * (g * g)
            w -= state.lr * g / (np.sqrt(sq) + state.eps)
    return state
