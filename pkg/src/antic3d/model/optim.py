"""Adam with global gradient-norm clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams

__all__ = ["AdamState", "OptimizerError", "clip_gradients", "global_norm", "optimizer_step"]


class OptimizerError(ValueError):
    pass


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    v: dict[str, np.ndarray] = field(default_factory=dict, repr=False)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    # fixed summation order: insertion order of the parameter table
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


def optimizer_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState):
    """Return ``(new_params, new_state)``; inputs are left untouched."""
    for name, g in grads.items():
        if name not in params.arrays:
            raise OptimizerError(f"gradient for unknown parameter block {name}")
        if g.shape != params[name].shape:
            raise OptimizerError(f"{name}: gradient shape {g.shape} != {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient in parameter block {name}")
    grads = clip_gradients(grads, state.clip_norm)
    step = state.step + 1
    c1 = 1.0 - state.beta1**step
    c2 = 1.0 - state.beta2**step
    new_arrays, new_m, new_v = {}, {}, {}
    for name, p in params.arrays.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        m = state.beta1 * state.m.get(name, 0.0) + (1 - state.beta1) * g
        v = state.beta2 * state.v.get(name, 0.0) + (1 - state.beta2) * g * g
        new_arrays[name] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[name] = m
        new_v[name] = v
    new_state = AdamState(state.lr, state.beta1, state.beta2, state.eps, state.clip_norm, step, new_m, new_v)
    return params.replace(new_arrays), new_state
