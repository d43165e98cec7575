"""Adam with bias correction over :class:`ModelParameters`."""
from dataclasses import dataclass

import numpy as np

from .params import ModelParameters


@dataclass(frozen=True)
class AdamState:
    m: ModelParameters
    v: ModelParameters
    step: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, params, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(params.zeros_like(), params.zeros_like(), 0, learning_rate, beta1, beta2, epsilon)


def adam_step(state, params, grads):
    """One Adam update. Returns (new params, new state); inputs are untouched."""
    if state.step < 0:
        raise ValueError("Adam step counter must be non-negative")
    if not (params.same_layout(grads) and params.same_layout(state.m)):
        raise ValueError("parameter, gradient and optimizer layouts differ")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name!r}")
    b1, b2 = state.beta1, state.beta2
    t = state.step + 1
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for name, p in params.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        step = state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
        new_p.append((name, p - step))
        new_m.append((name, m))
        new_v.append((name, v))
    new_state = AdamState(
        ModelParameters(new_m), ModelParameters(new_v), t,
        state.learning_rate, b1, b2, state.epsilon,
    )
    return ModelParameters(new_p), new_state
