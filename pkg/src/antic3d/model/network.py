"""Forward pass, stateful streaming and BPTT for the stacked-LSTM model.

The recurrence runs through :mod:`.kernels`; heads are applied one time
step at a time so that a clip forward and a sequence of single-frame stream
steps perform the same floating-point operations and agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..losses.terms import (
    LossBreakdown,
    LossError,
    LossSpec,
    actionness_grad,
    classification_grad,
    combine_losses,
    full_rep_grad,
    loss_actionness,
    loss_classification,
)
from . import kernels
from .params import ModelParams

__all__ = [
    "ForwardResult",
    "StreamState",
    "Batch",
    "softmax",
    "forward_clip",
    "stream_step",
    "stack_clips",
    "batch_loss",
    "backward_clip",
    "loss_and_grads",
]


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _head_logits(params: ModelParams, h: np.ndarray):
    return h @ params["cls.W"] + params["cls.b"], h @ params["act.W"] + params["act.b"]


@dataclass
class ForwardResult:
    """Per-frame outputs for a (possibly batched) clip.

    Arrays are time-major: ``probs`` (L, B, C+1), ``act_probs`` (L, B, 2),
    ``hidden`` is the top-layer track (L, B, H). ``cache`` holds per-layer
    kernel outputs for the backward pass.
    """

    probs: np.ndarray
    act_probs: np.ndarray
    hidden: np.ndarray
    cache: list = field(default_factory=list, repr=False)
    inputs: np.ndarray | None = field(default=None, repr=False)

    @property
    def q(self) -> np.ndarray:
        return self.act_probs[..., 1]

    def squeeze(self) -> "ForwardResult":
        """Drop a singleton batch axis (for single-clip callers)."""
        return ForwardResult(
            self.probs[:, 0], self.act_probs[:, 0], self.hidden[:, 0], self.cache, self.inputs
        )


def _as_batch(frames, input_dim):
    x = np.ascontiguousarray(frames, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[:, None, :]
    if x.ndim != 3 or x.shape[2] != input_dim:
        raise ValueError(f"frame dimension {x.shape[-1]} does not match model input {input_dim}")
    return x, single


def forward_clip(params: ModelParams, frames, keep_cache: bool = False) -> ForwardResult:
    """Run the model over a clip from the zero state.

    ``frames`` is (L, D) or time-major batched (L, B, D). Single clips return
    unbatched outputs.
    """
    x, single = _as_batch(frames, params.input_dim)
    L, B, _ = x.shape
    H = params.hidden
    layer_in = x
    cache = []
    for k in range(params.layers):
        h0 = np.zeros((B, H))
        hs, cs, gates = kernels.lstm_forward(
            layer_in, h0, h0, params[f"lstm{k}.Wx"], params[f"lstm{k}.Wh"], params[f"lstm{k}.b"]
        )
        cache.append((layer_in, hs, cs, gates))
        layer_in = hs
    logits = np.empty((L, B, params.num_classes + 1))
    act = np.empty((L, B, 2))
    # per-step products keep the arithmetic identical to stream_step
    for t in range(L):
        logits[t], act[t] = _head_logits(params, layer_in[t])
    out = ForwardResult(softmax(logits), softmax(act), layer_in, cache if keep_cache else [], x if keep_cache else None)
    return out.squeeze() if single else out


@dataclass
class StreamState:
    """Per-layer hidden/cell vectors plus the number of frames consumed."""

    h: list[np.ndarray]
    c: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: ModelParams, batch: int = 1) -> "StreamState":
        H = params.hidden
        return cls([np.zeros((batch, H)) for _ in range(params.layers)],
                   [np.zeros((batch, H)) for _ in range(params.layers)])

    def reset(self) -> None:
        for arr in self.h + self.c:
            arr.fill(0.0)
        self.t = 0


def stream_step(params: ModelParams, state: StreamState, frame):
    """Consume one frame; returns ``(state', p_t, q_t, h_t)``.

    The input state is not modified.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] != params.input_dim:
        raise ValueError(f"frame dimension {frame.shape[-1]} does not match model input {params.input_dim}")
    x = np.ascontiguousarray(frame.reshape(1, -1, params.input_dim))
    new_h, new_c = [], []
    for k in range(params.layers):
        hs, cs, _ = kernels.lstm_forward(
            x, state.h[k], state.c[k], params[f"lstm{k}.Wx"], params[f"lstm{k}.Wh"], params[f"lstm{k}.b"]
        )
        new_h.append(hs[0])
        new_c.append(cs[0])
        x = hs
    logits, act_logits = _head_logits(params, new_h[-1])
    probs, act = softmax(logits), softmax(act_logits)
    squeeze = frame.ndim == 1
    p, q, h = probs, act[:, 1], new_h[-1]
    if squeeze:
        p, q, h = p[0], q[0], h[0]
    return StreamState(new_h, new_c, state.t + 1), p, q, h


# --------------------------------------------------------------------------
# training


@dataclass
class Batch:
    """Time-major stacked clips: frames (L, B, D), labels (L, B) and, per
    clip, covered instances as ``(key, lo, hi)`` 0-based end-exclusive."""

    frames: np.ndarray
    labels: np.ndarray
    covered: list[list[tuple[str, int, int]]]

    @property
    def size(self) -> int:
        return self.frames.shape[1]


def stack_clips(clips) -> Batch:
    lengths = {c.length for c in clips}
    if len(lengths) != 1:
        raise ValueError(f"clips in a batch must share a length, got {sorted(lengths)}")
    frames = np.ascontiguousarray(np.stack([c.frames for c in clips], axis=1))
    labels = np.stack([c.labels for c in clips], axis=1)
    return Batch(frames, labels, [c.covered_local() for c in clips])


def _loss_terms(params: ModelParams, out: ForwardResult, batch: Batch, spec: LossSpec):
    """Batch-mean loss breakdown plus gradients w.r.t. logits, actionness
    logits, top hidden track and the projection matrix."""
    L, B = batch.labels.shape
    C1 = params.num_classes + 1
    scale = 1.0 / (L * B)
    flat_labels = batch.labels.reshape(-1)
    # values come from the loss functions so they match them bit for bit
    lc = loss_classification(out.probs.reshape(-1, C1), flat_labels)
    _, dlogits = classification_grad(out.probs.reshape(-1, C1), flat_labels, scale)
    dlogits = dlogits.reshape(L, B, C1)
    dact = None
    ln = 0.0
    if spec.beta:
        targets = flat_labels != 0
        ln = loss_actionness(out.q.reshape(-1), targets)
        _, dact = actionness_grad(out.q.reshape(-1), targets, scale)
        dact = dact.reshape(L, B, 2) * spec.beta
    dhid = None
    dW = None
    lr = 0.0
    if spec.alpha:
        dhid = np.zeros_like(out.hidden)
        dW = np.zeros_like(params["proj.W"])
        for b, covered in enumerate(batch.covered):
            if not covered:
                continue
            reps = [spec.rep(key) for key, _, _ in covered]
            intervals = [(lo, hi) for _, lo, hi in covered]
            lr_b, dh_b, dW_b = full_rep_grad(out.hidden[:, b], intervals, reps, params["proj.W"], 1.0 / B)
            lr += lr_b
            dhid[:, b] += spec.alpha * dh_b
            dW += spec.alpha * dW_b
    return combine_losses(lc, lr, ln, spec), dlogits, dact, dhid, dW


def batch_loss(params: ModelParams, batch: Batch, spec: LossSpec) -> LossBreakdown:
    out = forward_clip(params, batch.frames)
    return _loss_terms(params, out, batch, spec)[0]


def _check_reps(batch: Batch, spec: LossSpec, hidden: int) -> None:
    if not spec.alpha:
        return
    for covered in batch.covered:
        for key, _, _ in covered:
            rep = spec.rep(key)
            if rep.shape != (hidden,):
                raise LossError(f"teacher representation for {key} has shape {rep.shape}, expected ({hidden},)")


def backward_clip(params: ModelParams, out: ForwardResult, batch: Batch, spec: LossSpec):
    """Exact gradients of the batch-mean composite loss.

    ``out`` must come from ``forward_clip(..., keep_cache=True)`` on
    ``batch.frames``. Returns ``(breakdown, grads)`` with ``grads`` keyed like
    ``params.arrays``.
    """
    if not out.cache:
        raise ValueError("forward result has no cache; call forward_clip(keep_cache=True)")
    _check_reps(batch, spec, params.hidden)
    breakdown, dlogits, dact, dhid, dW = _loss_terms(params, out, batch, spec)
    grads = params.zeros_like()
    top = out.hidden
    H = params.hidden
    grads["cls.W"] = np.einsum("tbh,tbk->hk", top, dlogits)
    grads["cls.b"] = dlogits.sum(axis=(0, 1))
    dh = dlogits @ params["cls.W"].T
    if dact is not None:
        grads["act.W"] = np.einsum("tbh,tbk->hk", top, dact)
        grads["act.b"] = dact.sum(axis=(0, 1))
        dh += dact @ params["act.W"].T
    if dhid is not None:
        dh += dhid
        grads["proj.W"] = dW
    dh = np.ascontiguousarray(dh)
    for k in range(params.layers - 1, -1, -1):
        layer_in, hs, cs, gates = out.cache[k]
        B = layer_in.shape[1]
        zero = np.zeros((B, H))
        dx, dWx, dWh, db = kernels.lstm_backward(
            layer_in, zero, zero, params[f"lstm{k}.Wx"], params[f"lstm{k}.Wh"], hs, cs, gates, dh
        )
        grads[f"lstm{k}.Wx"] = dWx
        grads[f"lstm{k}.Wh"] = dWh
        grads[f"lstm{k}.b"] = db
        dh = dx
    return breakdown, grads


def loss_and_grads(params: ModelParams, batch: Batch, spec: LossSpec):
    out = forward_clip(params, batch.frames, keep_cache=True)
    return backward_clip(params, out, batch, spec)
