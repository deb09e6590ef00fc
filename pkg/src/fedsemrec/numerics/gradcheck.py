"""Central-difference gradient verification.

The check runs the target function with parameter storage temporarily upcast
to float64 so it validates the chain rule itself rather than float32
round-off. The divided difference uses the actually-stored perturbed values,
which makes exact-quadratic cases exact.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .autodiff import Parameter, backward


def grad_check(f, params, h: float = 1e-3) -> float:
    """Max hybrid relative error between analytic and finite-difference grads.

    ``f`` is a zero-argument callable that rebuilds its graph from the current
    parameter values and returns a scalar Tensor; it must be deterministic.
    Error per coordinate is |fd - analytic| / max(1, |fd|, |analytic|).
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    checked = [p for p in params if isinstance(p, Parameter) and p.trainable]
    saved = [(p.value, p.grad) for p in checked]
    for p in checked:
        p.value = p.value.astype(np.float64)
        p.grad = np.zeros_like(p.value)
    try:
        loss = f()
        if not np.isfinite(float(loss.value)):
            raise TrainingError("objective is non-finite at the gradient-check point")
        backward(loss)
        analytic = [p.grad.copy() for p in checked]
        worst = 0.0
        for p, an in zip(checked, analytic):
            flat = p.value.reshape(-1)
            an_flat = an.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                hi, lo = orig + h, orig - h
                flat[i] = hi
                f_hi = float(f().value)
                flat[i] = lo
                f_lo = float(f().value)
                flat[i] = orig
                if not (np.isfinite(f_hi) and np.isfinite(f_lo)):
                    raise TrainingError("objective is non-finite at a perturbed point")
                fd = (f_hi - f_lo) / (hi - lo)
                err = abs(fd - an_flat[i]) / max(1.0, abs(fd), abs(an_flat[i]))
                worst = max(worst, err)
        return worst
    finally:
        for p, (value, grad) in zip(checked, saved):
            p.value = value
            p.grad = grad
