"""Training losses. Teacher pipeline lives in :mod:`antic3d.losses.teacher`."""

from .terms import (
    PROB_FLOOR,
    LossBreakdown,
    LossError,
    LossSpec,
    combine_losses,
    loss_actionness,
    loss_classification,
    loss_full_rep,
    loss_total,
)

__all__ = [
    "PROB_FLOOR",
    "LossBreakdown",
    "LossError",
    "LossSpec",
    "combine_losses",
    "loss_actionness",
    "loss_classification",
    "loss_full_rep",
    "loss_total",
]
