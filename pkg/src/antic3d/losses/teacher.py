"""Teacher ("side") network: trained on trimmed instances, then frozen to
provide each instance's full-observation representation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..checkpoint import CheckpointError, file_hash, load_container, save_container
from ..data import UntrimmedSequence, normalize_clip
from ..model import AdamState, ModelParams, forward_clip, init_params, loss_and_grads, optimizer_step
from ..model.network import Batch
from ..training import EpochRecord, TrainResult, _mean_breakdown, accumulate, seed_rng
from .terms import LossSpec

log = logging.getLogger(__name__)

__all__ = [
    "TrimmedInstance",
    "TeacherRepStore",
    "trimmed_instances",
    "train_teacher",
    "extract_full_reps",
    "save_rep_store",
    "load_rep_store",
]


@dataclass(frozen=True)
class TrimmedInstance:
    key: str
    frames: np.ndarray
    class_id: int


def trimmed_instances(seqs: list[UntrimmedSequence], joints: int, dims: int = 3, normalize: bool = True):
    """Cut every instance ``[start, end]`` out of its sequence."""
    out = []
    for seq in seqs:
        for idx, inst in enumerate(seq.instances):
            if inst.end > seq.T:
                raise ValueError(f"instance {seq.instance_key(idx)} exceeds sequence length {seq.T}")
            frames = seq.frames[inst.start - 1 : inst.end]
            if normalize:
                frames = normalize_clip(frames, joints, dims)
            out.append(TrimmedInstance(seq.instance_key(idx), np.ascontiguousarray(frames), inst.class_id))
    return out


def _single(item: TrimmedInstance) -> Batch:
    L = item.frames.shape[0]
    return Batch(item.frames[:, None, :], np.full((L, 1), item.class_id), [[]])


def train_teacher(
    items: list[TrimmedInstance],
    num_classes: int,
    *,
    hidden: int = 100,
    layers: int = 3,
    epochs: int = 30,
    batch_size: int = 8,
    lr: float = 1e-3,
    clip_norm: float = 5.0,
    seed: int = 0,
) -> TrainResult:
    """Fit a same-architecture network with every frame labelled by its
    instance's class. Instances have different lengths, so each is run on
    its own and gradients are averaged over a minibatch in a fixed order."""
    if not items:
        raise ValueError("no trimmed instances to train the teacher on")
    params = init_params(items[0].frames.shape[1], hidden, layers, num_classes, seed_rng(seed, 0))
    opt = AdamState(lr=lr, clip_norm=clip_norm)
    spec = LossSpec(0.0, 0.0)
    history = []
    best, best_epoch, best_loss = params, -1, np.inf
    for epoch in range(epochs):
        order = seed_rng(seed, 1, epoch).permutation(len(items))
        parts = []
        for lo in range(0, len(order), batch_size):
            chunk = order[lo : lo + batch_size]
            total = None
            for k in chunk:
                breakdown, grads = loss_and_grads(params, _single(items[k]), spec)
                total = accumulate(total, grads, 1.0 / len(chunk))
                parts.append((breakdown, 1))
            params, opt = optimizer_step(params, total, opt)
        rec = EpochRecord(epoch + 1, _mean_breakdown(parts))
        history.append(rec)
        log.info("teacher epoch %d: L_c=%.4f", rec.epoch, rec.loss.classification)
        if rec.loss.total < best_loss:
            best, best_epoch, best_loss = params, rec.epoch, rec.loss.total
    return TrainResult(params, best, best_epoch, history)


@dataclass(frozen=True)
class TeacherRepStore:
    """Immutable map from instance key to the teacher's top-layer hidden
    vector at the instance's last frame."""

    reps: dict
    teacher_hash: str = ""

    def __post_init__(self):
        for arr in self.reps.values():
            arr.setflags(write=False)

    def __getitem__(self, key):
        return self.reps[key]

    def __len__(self):
        return len(self.reps)


def extract_full_reps(teacher: ModelParams, items: list[TrimmedInstance], teacher_hash: str = "") -> TeacherRepStore:
    reps = {}
    for item in items:
        out = forward_clip(teacher, item.frames)
        reps[item.key] = out.hidden[-1].copy()
    return TeacherRepStore(reps, teacher_hash)


def save_rep_store(path, store: TeacherRepStore) -> str:
    arrays = {f"rep/{k}": v for k, v in store.reps.items()}
    return save_container(path, arrays, {"kind": "reps", "teacher_hash": store.teacher_hash})


def load_rep_store(path) -> TeacherRepStore:
    arrays, config = load_container(path)
    if config.get("kind") != "reps":
        raise CheckpointError(f"{path} is not a representation store")
    reps = {k[len("rep/") :]: v for k, v in arrays.items()}
    return TeacherRepStore(reps, config.get("teacher_hash", ""))


def teacher_hash_of(path) -> str:
    return file_hash(path)
