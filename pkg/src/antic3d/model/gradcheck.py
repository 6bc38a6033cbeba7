"""Central finite-difference verification of the analytic BPTT gradients."""

from __future__ import annotations

import numpy as np

from ..losses.terms import LossSpec
from .network import Batch, batch_loss, loss_and_grads
from .params import ModelParams

__all__ = ["relative_error", "numeric_grad", "grad_check"]


def relative_error(analytic, numeric, floor: float = 1e-8):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_grad(
    params: ModelParams, batch: Batch, spec: LossSpec, name: str, index, eps: float, order: int = 4
) -> float:
    """Central difference of the batch loss along one coordinate.

    ``order=2`` is the three-point stencil. ``order=4`` adds the ``2*eps``
    points and cancels the ``eps**2`` truncation term, which allows a step
    large enough that rounding in the loss stays below the tolerance even
    for gradients near 1e-8.
    """
    if order not in (2, 4):
        raise ValueError(f"stencil order must be 2 or 4, got {order}")
    arr = params.arrays[name]
    orig = arr[index]

    def at(delta):
        arr[index] = orig + delta
        return batch_loss(params, batch, spec).total

    try:
        d1 = at(eps) - at(-eps)
        if order == 2:
            return d1 / (2.0 * eps)
        d2 = at(2 * eps) - at(-2 * eps)
    finally:
        arr[index] = orig
    return (8.0 * d1 - d2) / (12.0 * eps)


def grad_check(
    params: ModelParams,
    batch: Batch,
    spec: LossSpec,
    eps: float = 3e-3,
    per_block: int | None = 20,
    rng: np.random.Generator | int = 0,
    return_details: bool = False,
    order: int = 4,
):
    """Max relative error between analytic and central-difference gradients.

    Checks ``per_block`` random coordinates of every parameter block (all of
    them when ``None``). ``params`` is perturbed in place and restored.
    """
    if not eps > 0:
        raise ValueError(f"finite-difference step must be positive, got {eps}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    _, grads = loss_and_grads(params, batch, spec)
    worst = 0.0
    details = []
    for name, arr in params.arrays.items():
        n = arr.size
        flat = np.arange(n) if per_block is None or per_block >= n else rng.choice(n, per_block, replace=False)
        for f in flat:
            idx = np.unravel_index(int(f), arr.shape)
            num = numeric_grad(params, batch, spec, name, idx, eps, order)
            ana = grads[name][idx]
            err = float(relative_error(ana, num))
            details.append((name, idx, ana, num, err))
            worst = max(worst, err)
    return (worst, details) if return_details else worst
