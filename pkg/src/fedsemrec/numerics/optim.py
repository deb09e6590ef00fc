"""Bias-corrected Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import StateError
from .autodiff import Parameter


@dataclass
class AdamState:
    """First/second moment buffers for one parameter."""

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: Parameter, lr: float = 1e-4, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros_like(param.value), np.zeros_like(param.value),
                   0, lr, beta1, beta2, eps)


def adam_step(param: Parameter, state: AdamState) -> None:
    """One bias-corrected update of ``param.value`` from ``param.grad``."""
    if not param.trainable:
        raise StateError("adam_step called on a frozen parameter")
    if state.m.shape != param.value.shape:
        raise StateError(
            f"optimizer state shape {state.m.shape} does not match parameter {param.value.shape}"
        )
    g = param.grad
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (g * g)
    state.step_count += 1
    m_hat = state.m / (1.0 - state.beta1**state.step_count)
    v_hat = state.v / (1.0 - state.beta2**state.step_count)
    param.value -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.value.dtype)


@dataclass
class Adam:
    """Adam over the trainable subset of a parameter list."""

    params: list[Parameter]
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: list[AdamState] = field(init=False)

    def __post_init__(self):
        self.params = [p for p in self.params if p.trainable]
        self.states = [
            AdamState.for_param(p, self.lr, self.beta1, self.beta2, self.eps) for p in self.params
        ]

    def step(self):
        for p, s in zip(self.params, self.states):
            adam_step(p, s)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
