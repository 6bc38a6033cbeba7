"""Streaming evaluation: anticipation accuracy over observation ratios and
class-averaged frame accuracies, plus clip stitching and report I/O."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .data import ActionInstance, StreamNormalizer, UntrimmedSequence, derive_frame_labels, normalize_clip
from .model import ModelParams, StreamState, forward_clip, stream_step
from .sampling import sliding_window_starts

__all__ = [
    "EvalError",
    "PredictionStream",
    "MetricsReport",
    "observation_frame",
    "instance_label",
    "anticipation_accuracy",
    "per_class_accuracy",
    "frame_accuracy",
    "stitch_predictions",
    "predict_stream",
    "predict_stitched",
    "evaluate",
    "evaluate_streams",
    "write_report_csv",
    "read_report_csv",
    "frame_dump_rows",
    "write_frame_dump",
    "gamma_labels",
]


class EvalError(ValueError):
    pass


@dataclass
class PredictionStream:
    """Per-frame class probabilities (T, C+1) and actionness (T,)."""

    probs: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        if self.probs.ndim != 2 or self.q.shape != (self.probs.shape[0],):
            raise EvalError("probs must be (T, K) and q must be (T,)")

    @property
    def T(self) -> int:
        return self.probs.shape[0]

    def argmax(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)


def observation_frame(instance: ActionInstance, k: int, M: int) -> int:
    """Last observed (1-based) frame at observation ratio ``k/M``."""
    if not 1 <= k <= M - 1:
        raise EvalError(f"k must lie in [1, {M - 1}], got {k}")
    return instance.start + (instance.tau * k) // M


def instance_label(stream: PredictionStream, instance: ActionInstance, k: int, M: int, rule: str = "last") -> int:
    t = observation_frame(instance, k, M)
    if rule == "last":
        return int(np.argmax(stream.probs[t - 1]))
    if rule == "mean":
        return int(np.argmax(stream.probs[instance.start - 1 : t].mean(axis=0)))
    raise EvalError(f"unknown instance-label rule {rule!r}")


def _check_lengths(streams, seqs):
    if len(streams) != len(seqs):
        raise EvalError(f"{len(streams)} streams for {len(seqs)} sequences")
    for s, seq in zip(streams, seqs):
        T = seq.T if isinstance(seq, UntrimmedSequence) else len(seq)
        if s.T != T:
            raise EvalError(f"stream length {s.T} != sequence length {T}")


def anticipation_accuracy(streams, sequences, M: int = 10, rule: str = "last"):
    """Accuracy at ``gamma = k/M`` for ``k = 1..M-1``; NaN when there are no
    instances. A background argmax counts as wrong. Returns ``(acc, n)``."""
    _check_lengths(streams, sequences)
    correct = np.zeros(M - 1, dtype=np.int64)
    n = 0
    for stream, seq in zip(streams, sequences):
        for inst in seq.instances:
            n += 1
            for k in range(1, M):
                correct[k - 1] += instance_label(stream, inst, k, M, rule) == inst.class_id
    if n == 0:
        return np.full(M - 1, np.nan), 0
    return correct / n, n


def per_class_accuracy(streams, label_tracks, num_classes: int):
    """``{class: (accuracy, n_frames)}`` pooled over sequences, classes with
    frames only."""
    _check_lengths(streams, label_tracks)
    hits = np.zeros(num_classes + 1, dtype=np.int64)
    totals = np.zeros(num_classes + 1, dtype=np.int64)
    for stream, labels in zip(streams, label_tracks):
        labels = np.asarray(labels)
        pred = stream.argmax()
        totals += np.bincount(labels, minlength=num_classes + 1)
        hits += np.bincount(labels[pred == labels], minlength=num_classes + 1)
    return {c: (hits[c] / totals[c], int(totals[c])) for c in range(num_classes + 1) if totals[c]}


def frame_accuracy(streams, label_tracks, include_background: bool, num_classes: int | None = None) -> float:
    """Unweighted mean of per-class frame accuracies."""
    if num_classes is None:
        num_classes = max([int(np.max(l)) for l in label_tracks if len(l)] + [s.probs.shape[1] - 1 for s in streams])
    table = per_class_accuracy(streams, label_tracks, num_classes)
    accs = [a for c, (a, _) in table.items() if include_background or c != 0]
    return float(np.mean(accs)) if accs else math.nan


def stitch_predictions(clip_preds, starts, T: int) -> PredictionStream:
    """Assemble a stream from per-window ``(probs, q)``; earlier windows win
    where windows overlap."""
    if not clip_preds:
        raise EvalError("no clip predictions")
    K = clip_preds[0][0].shape[1]
    probs = np.full((T, K), np.nan)
    q = np.full(T, np.nan)
    filled = np.zeros(T, dtype=bool)
    for (p, qq), s in zip(clip_preds, starts):
        lo = s - 1
        hi = min(lo + len(p), T)
        sl = slice(lo, hi)
        todo = ~filled[sl]
        probs[sl][todo] = p[: hi - lo][todo]
        q[sl][todo] = qq[: hi - lo][todo]
        filled[sl] = True
    if not filled.all():
        raise EvalError(f"frame {int(np.argmin(filled)) + 1} not covered by any window")
    return PredictionStream(probs, q)


def predict_stream(params: ModelParams, frames, joints: int, dims: int = 3, normalize: bool = True):
    """Stateful frame-by-frame inference over a whole sequence."""
    norm = StreamNormalizer(joints, dims, enabled=normalize)
    state = StreamState.zeros(params)
    probs, qs = [], []
    for frame in np.asarray(frames):
        state, p, q, _ = stream_step(params, state, norm(frame))
        probs.append(p)
        qs.append(q)
    return PredictionStream(np.array(probs), np.array(qs))


def predict_stitched(params, frames, clip_len: int, stride: int, joints: int, dims: int = 3, normalize=True):
    frames = np.asarray(frames)
    T = frames.shape[0]
    stride = stride or clip_len
    if not 1 <= stride <= clip_len:
        raise EvalError(f"stitch stride must lie in [1, {clip_len}], got {stride}")
    # sequences shorter than a window are covered by one shortened window
    L = min(clip_len, T)
    starts = sliding_window_starts(T, L, min(stride, L))
    preds = []
    for s in starts:
        win = frames[s - 1 : s - 1 + L]
        if normalize:
            win = normalize_clip(win, joints, dims)
        out = forward_clip(params, win)
        preds.append((out.probs, out.q))
    return stitch_predictions(preds, starts, T)


def gamma_labels(M: int) -> list[str]:
    return [f"{k / M:g}" for k in range(1, M)]


@dataclass
class MetricsReport:
    M: int
    anticipation_acc: np.ndarray
    n_instances: int
    avg_acc_with_bg: float
    avg_acc_without_bg: float
    per_class: dict[int, tuple[float, int]] = field(default_factory=dict)

    @property
    def gammas(self) -> list[float]:
        return [k / self.M for k in range(1, self.M)]

    def at(self, gamma: float) -> float:
        k = round(gamma * self.M)
        return float(self.anticipation_acc[k - 1])


def evaluate_streams(streams, sequences, num_classes: int, M: int = 10, rule: str = "last") -> MetricsReport:
    tracks = [derive_frame_labels(s, num_classes) for s in sequences]
    acc, n = anticipation_accuracy(streams, sequences, M, rule)
    return MetricsReport(
        M=M,
        anticipation_acc=acc,
        n_instances=n,
        avg_acc_with_bg=frame_accuracy(streams, tracks, True, num_classes),
        avg_acc_without_bg=frame_accuracy(streams, tracks, False, num_classes),
        per_class=per_class_accuracy(streams, tracks, num_classes),
    )


def evaluate(
    params: ModelParams,
    sequences: list[UntrimmedSequence],
    num_classes: int,
    joints: int,
    dims: int = 3,
    *,
    M: int = 10,
    rule: str = "last",
    mode: str = "stream",
    clip_len: int = 50,
    stride: int = 0,
    normalize: bool = True,
):
    """Predict every sequence and score it; returns ``(report, streams)``."""
    if params.num_classes != num_classes:
        raise EvalError(f"checkpoint has {params.num_classes} classes, manifest has {num_classes}")
    streams = []
    for seq in sequences:
        if mode == "stream":
            streams.append(predict_stream(params, seq.frames, joints, dims, normalize))
        elif mode == "stitch":
            streams.append(predict_stitched(params, seq.frames, clip_len, stride, joints, dims, normalize))
        else:
            raise EvalError(f"unknown test mode {mode!r}")
    return evaluate_streams(streams, sequences, num_classes, M, rule), streams


# --------------------------------------------------------------------------
# CSV I/O


def _fmt(x) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def write_report_csv(report: MetricsReport, fh) -> None:
    """Three blank-line separated tables: per-gamma accuracy, the two frame
    accuracies, and the per-class frame accuracy."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["gamma", "accuracy", "n_instances"])
    for g, a in zip(gamma_labels(report.M), report.anticipation_acc):
        w.writerow([g, _fmt(float(a)), report.n_instances])
    fh.write("\n")
    w.writerow(["metric", "value"])
    w.writerow(["avg_acc_w_bg", _fmt(report.avg_acc_with_bg)])
    w.writerow(["avg_acc_wo_bg", _fmt(report.avg_acc_without_bg)])
    fh.write("\n")
    w.writerow(["class_id", "accuracy", "n_frames"])
    for c, (a, n) in sorted(report.per_class.items()):
        w.writerow([c, _fmt(float(a)), n])


def read_report_csv(text: str) -> MetricsReport:
    blocks = [b for b in text.strip("\n").split("\n\n") if b.strip()]
    if len(blocks) != 3:
        raise EvalError("report CSV must hold three tables")
    rows = [list(csv.reader(io.StringIO(b))) for b in blocks]
    gam = rows[0][1:]
    acc = np.array([float(r[1]) for r in gam])
    n = int(gam[0][2]) if gam else 0
    summary = {r[0]: float(r[1]) for r in rows[1][1:]}
    per_class = {int(r[0]): (float(r[1]), int(r[2])) for r in rows[2][1:]}
    return MetricsReport(len(gam) + 1, acc, n, summary["avg_acc_w_bg"], summary["avg_acc_wo_bg"], per_class)


DUMP_COLUMNS = ["sequence", "frame", "true_label", "argmax", "p_max", "q"]


def frame_dump_rows(name: str, stream: PredictionStream, labels=None):
    """Rows ``(sequence, frame, true_label, argmax, p_max, q)``; floats are
    formatted with ``repr`` so they round-trip exactly."""
    am = stream.argmax()
    for t in range(stream.T):
        true = "" if labels is None else int(labels[t])
        yield [name, t + 1, true, int(am[t]), repr(float(stream.probs[t, am[t]])), repr(float(stream.q[t]))]


def write_frame_dump(fh, named_streams, tracks=None) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DUMP_COLUMNS)
    for i, (name, stream) in enumerate(named_streams):
        w.writerows(frame_dump_rows(name, stream, None if tracks is None else tracks[i]))
