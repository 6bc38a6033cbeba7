"""Minibatch training of the anticipation network on sampled clips."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import UntrimmedSequence, derive_frame_labels
from .losses.terms import LossBreakdown, LossError, LossSpec
from .model import AdamState, ModelParams, init_params, loss_and_grads, optimizer_step, stack_clips
from .sampling import SamplerConfig, epoch_clips, epoch_rng

log = logging.getLogger(__name__)

__all__ = ["EpochRecord", "TrainResult", "seed_rng", "train_model", "accumulate"]

LOG_COLUMNS = ["epoch", "L_c", "L_r", "L_n", "total"]


@dataclass
class EpochRecord:
    epoch: int
    loss: LossBreakdown

    def row(self):
        return [self.epoch, *self.loss.as_row()]


@dataclass
class TrainResult:
    params: ModelParams
    best: ModelParams
    best_epoch: int
    history: list[EpochRecord] = field(default_factory=list)


def seed_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


def accumulate(total: dict | None, grads: dict, weight: float = 1.0) -> dict:
    if total is None:
        return {k: g * weight for k, g in grads.items()}
    for k, g in grads.items():
        total[k] += g * weight
    return total


def _mean_breakdown(parts: list[tuple[LossBreakdown, int]]) -> LossBreakdown:
    n = sum(w for _, w in parts)
    vals = np.zeros(4)
    for b, w in parts:
        vals += np.asarray(b.as_row()) * w
    vals /= max(n, 1)
    return LossBreakdown(*map(float, vals))


def train_model(
    train: list[UntrimmedSequence],
    num_classes: int,
    joints: int,
    dims: int,
    sampler: SamplerConfig,
    spec: LossSpec,
    *,
    hidden: int = 100,
    layers: int = 3,
    epochs: int = 30,
    batch_size: int = 8,
    lr: float = 1e-3,
    clip_norm: float = 5.0,
    seed: int = 0,
    normalize: bool = True,
    init: ModelParams | None = None,
    on_epoch: Callable[[EpochRecord, ModelParams], None] | None = None,
) -> TrainResult:
    """Train from clips drawn by ``sampler``; a pure function of its inputs.

    The best model is the one with the lowest epoch-mean total loss.
    """
    if not train:
        raise ValueError("no training sequences")
    tracks = [derive_frame_labels(s, num_classes) for s in train]
    if spec.alpha:
        missing = [
            s.instance_key(i)
            for s in train
            for i in range(len(s.instances))
            if spec.teacher_reps is None or s.instance_key(i) not in spec.teacher_reps
        ]
        if missing:
            raise LossError(f"missing teacher representation for instance {missing[0]}")
    params = init if init is not None else init_params(
        train[0].frame_dim, hidden, layers, num_classes, seed_rng(seed, 0)
    )
    opt = AdamState(lr=lr, clip_norm=clip_norm)
    norm = {"normalize": normalize, "joints": joints, "dims": dims}
    best, best_epoch, best_loss = params, -1, np.inf
    history = []
    for epoch in range(epochs):
        rng = epoch_rng(seed, epoch)
        clips = epoch_clips(train, tracks, sampler, epoch, rng, **norm)
        parts = []
        for lo in range(0, len(clips), batch_size):
            batch = stack_clips(clips[lo : lo + batch_size])
            breakdown, grads = loss_and_grads(params, batch, spec)
            params, opt = optimizer_step(params, grads, opt)
            parts.append((breakdown, batch.size))
        rec = EpochRecord(epoch + 1, _mean_breakdown(parts))
        history.append(rec)
        log.info("epoch %d: L_c=%.4f L_r=%.4f L_n=%.4f total=%.4f", rec.epoch, *rec.loss.as_row())
        if rec.loss.total < best_loss:
            best, best_epoch, best_loss = params, rec.epoch, rec.loss.total
        if on_epoch is not None:
            on_epoch(rec, params)
    return TrainResult(params, best, best_epoch, history)
