"""Training-clip samplers: action-centric, sliding window and the alternating
AC/SW schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ActionInstance, UntrimmedSequence, derive_frame_labels, normalize_clip

__all__ = [
    "Clip",
    "SamplerConfig",
    "SamplingError",
    "MODES",
    "action_centric_start",
    "action_centric_sample",
    "sliding_window_starts",
    "sliding_window_sample",
    "epoch_schedule",
    "make_clip",
    "epoch_clips",
    "epoch_rng",
]

MODES = ("AC", "SW", "AC/SW")


class SamplingError(ValueError):
    pass


@dataclass
class Clip:
    """A fixed-length window of a sequence.

    ``start`` is the 1-based first frame. ``covered`` lists
    ``(instance_key, first, last)`` with 1-based absolute frames of each
    instance's overlap with the clip.
    """

    frames: np.ndarray
    labels: np.ndarray
    start: int
    covered: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def actionness(self) -> np.ndarray:
        return (self.labels != 0).astype(np.int64)

    @property
    def length(self) -> int:
        return len(self.labels)

    def covered_local(self):
        """Covered intervals as 0-based, end-exclusive clip offsets."""
        return [(key, a - self.start, b - self.start + 1) for key, a, b in self.covered]


@dataclass
class SamplerConfig:
    clip_len: int = 50
    context_window: int = 25
    mode: str = "AC"
    stride: int = 50

    def __post_init__(self):
        if self.clip_len < 1:
            raise SamplingError("clip_len must be >= 1")
        if self.context_window < 0:
            raise SamplingError("context_window must be >= 0")
        if self.stride < 1:
            raise SamplingError("stride must be >= 1")
        if self.mode not in MODES:
            raise SamplingError(f"sampler mode must be one of {MODES}, got {self.mode!r}")


def make_clip(
    seq: UntrimmedSequence,
    start: int,
    L: int,
    labels: np.ndarray,
    normalize: bool = False,
    joints: int | None = None,
    dims: int = 3,
) -> Clip:
    lo = start - 1
    frames = seq.frames[lo : lo + L]
    if normalize:
        frames = normalize_clip(frames, joints, dims)
    else:
        frames = frames.copy()
    end = start + L - 1
    covered = []
    for idx, inst in enumerate(seq.instances):
        a, b = max(inst.start, start), min(inst.end, end)
        if a <= b:
            covered.append((seq.instance_key(idx), a, b))
    return Clip(frames, labels[lo : lo + L].copy(), start, covered)


def action_centric_start(T: int, inst: ActionInstance, L: int, w: int, rng) -> int:
    """Draw a 1-based clip start for one instance."""
    if L < 1 or w < 0:
        raise SamplingError("need L >= 1 and w >= 0")
    if L > T:
        raise SamplingError(f"clip length {L} exceeds sequence length {T}")
    lo = max(1, inst.start - w)
    hi = min(T, inst.end + w)
    last = hi - L + 1
    if last >= lo:
        return int(rng.integers(lo, last + 1))
    center = (inst.start + inst.end) // 2
    return min(max(1, center - L // 2), T - L + 1)


def action_centric_sample(seq, instance, L, w, rng, labels=None, num_classes=None, **norm) -> Clip:
    if labels is None:
        labels = derive_frame_labels(seq, num_classes or max([i.class_id for i in seq.instances] + [1]))
    start = action_centric_start(seq.T, instance, L, w, rng)
    return make_clip(seq, start, L, labels, **norm)


def sliding_window_starts(T: int, L: int, stride: int) -> list[int]:
    if L > T:
        raise SamplingError(f"clip length {L} exceeds sequence length {T}")
    if not 1 <= stride <= L:
        # a stride beyond the window length would leave uncovered frames
        raise SamplingError(f"stride must lie in [1, clip length {L}], got {stride}")
    starts = list(range(1, T - L + 2, stride))
    if starts[-1] + L - 1 < T:
        starts.append(T - L + 1)
    return starts


def sliding_window_sample(seq, L, stride, labels=None, num_classes=None, **norm) -> list[Clip]:
    if labels is None:
        labels = derive_frame_labels(seq, num_classes or max([i.class_id for i in seq.instances] + [1]))
    return [make_clip(seq, s, L, labels, **norm) for s in sliding_window_starts(seq.T, L, stride)]


def epoch_schedule(mode: str, epoch_index: int) -> str:
    if mode not in MODES:
        raise SamplingError(f"sampler mode must be one of {MODES}, got {mode!r}")
    if mode == "AC/SW":
        return "AC" if epoch_index % 2 == 0 else "SW"
    return mode


def epoch_rng(seed: int, epoch: int, worker: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, worker, epoch]))


def epoch_clips(
    seqs: list[UntrimmedSequence],
    label_tracks: list[np.ndarray],
    cfg: SamplerConfig,
    epoch: int,
    rng: np.random.Generator,
    **norm,
) -> list[Clip]:
    """All training clips for one epoch, in presentation order.

    AC draws one clip per instance with instances shuffled; SW takes every
    window of every sequence, shuffled.
    """
    mode = epoch_schedule(cfg.mode, epoch)
    clips = []
    if mode == "AC":
        refs = [(si, ii) for si, s in enumerate(seqs) for ii in range(len(s.instances))]
        for k in rng.permutation(len(refs)):
            si, ii = refs[k]
            seq = seqs[si]
            start = action_centric_start(seq.T, seq.instances[ii], cfg.clip_len, cfg.context_window, rng)
            clips.append(make_clip(seq, start, cfg.clip_len, label_tracks[si], **norm))
    else:
        for si, seq in enumerate(seqs):
            for start in sliding_window_starts(seq.T, cfg.clip_len, cfg.stride):
                clips.append(make_clip(seq, start, cfg.clip_len, label_tracks[si], **norm))
        clips = [clips[k] for k in rng.permutation(len(clips))]
    return clips
