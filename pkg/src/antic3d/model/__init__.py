"""Stacked-LSTM backbone with classification, actionness and projection heads."""

from .kernels import BACKEND
from .network import (
    Batch,
    ForwardResult,
    StreamState,
    backward_clip,
    batch_loss,
    forward_clip,
    loss_and_grads,
    stack_clips,
    stream_step,
)
from .optim import AdamState, OptimizerError, clip_gradients, global_norm, optimizer_step
from .params import ModelParams, init_params, param_shapes
from .gradcheck import grad_check, relative_error

__all__ = [
    "BACKEND",
    "AdamState",
    "Batch",
    "ForwardResult",
    "ModelParams",
    "OptimizerError",
    "StreamState",
    "backward_clip",
    "batch_loss",
    "clip_gradients",
    "forward_clip",
    "global_norm",
    "grad_check",
    "init_params",
    "loss_and_grads",
    "optimizer_step",
    "param_shapes",
    "relative_error",
    "stack_clips",
    "stream_step",
]
