"""Loss terms: frame-wise classification, full-representation regression,
temporal actionness, and their weighted sum.

Each ``*_grad`` helper returns the loss together with its gradient with
respect to the quantity the network produces (logits or hidden vectors).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PROB_FLOOR",
    "LossError",
    "LossSpec",
    "LossBreakdown",
    "loss_classification",
    "loss_full_rep",
    "loss_actionness",
    "loss_total",
    "combine_losses",
    "classification_grad",
    "actionness_grad",
    "full_rep_grad",
]

PROB_FLOOR = 1e-12


class LossError(ValueError):
    pass


@dataclass
class LossSpec:
    """Weights of the auxiliary terms and the regression targets.

    ``teacher_reps`` maps instance keys (``"<sequence>:<index>"``) to the
    teacher's hidden vector at the instance's last frame.
    """

    alpha: float = 0.0
    beta: float = 0.0
    teacher_reps: dict[str, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise LossError("loss weights must be nonnegative")

    def rep(self, key: str) -> np.ndarray:
        if self.teacher_reps is None or key not in self.teacher_reps:
            raise LossError(f"missing teacher representation for instance {key}")
        return self.teacher_reps[key]


@dataclass
class LossBreakdown:
    classification: float
    full_rep: float
    actionness: float
    total: float

    def as_row(self):
        return [self.classification, self.full_rep, self.actionness, self.total]


def loss_classification(probs, labels) -> float:
    """Mean negative log-probability of the true class over frames."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= probs.shape[-1]:
        raise LossError(f"label outside [0, {probs.shape[-1] - 1}]")
    picked = np.take_along_axis(probs, labels[..., None], axis=-1)[..., 0]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def loss_actionness(q, targets) -> float:
    """Binary cross-entropy between actionness ``q`` and 0/1 targets."""
    q = np.asarray(q, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if np.any((q < 0) | (q > 1)):
        raise LossError("actionness must lie in [0, 1]")
    if np.any((y != 0) & (y != 1)):
        raise LossError("actionness targets must be 0 or 1")
    ll = y * np.log(np.maximum(q, PROB_FLOOR)) + (1 - y) * np.log(np.maximum(1 - q, PROB_FLOOR))
    return float(-np.mean(ll))


def loss_full_rep(hidden, intervals, reps, W) -> float:
    """Mean of ``||W h_t - h_e||^2`` over covered frames.

    ``hidden`` is (L, H); ``intervals`` is a list of 0-based end-exclusive
    ``(lo, hi)`` clip offsets, one per covered instance, with ``reps`` the
    matching targets. Pooling the frames is the covered-frame-weighted
    average of per-instance means.
    """
    total, count = 0.0, 0
    for (lo, hi), target in zip(intervals, reps):
        if hi <= lo:
            continue
        resid = hidden[lo:hi] @ W.T - target
        total += float(np.sum(resid * resid))
        count += hi - lo
    if count == 0:
        raise LossError("no covered instance frames in clip")
    return total / count


def combine_losses(lc: float, lr: float, ln: float, spec: LossSpec) -> LossBreakdown:
    """Weighted sum; a zero-weight term is reported as exactly 0."""
    lr = lr if spec.alpha else 0.0
    ln = ln if spec.beta else 0.0
    total = lc
    if spec.alpha:
        total = total + spec.alpha * lr
    if spec.beta:
        total = total + spec.beta * ln
    return LossBreakdown(lc, lr, ln, total)


def loss_total(probs, labels, spec: LossSpec, q=None, hidden=None, covered=(), W=None):
    """Composite loss of one clip; returns ``(total, breakdown)``.

    ``covered`` holds ``(instance_key, lo, hi)`` 0-based end-exclusive clip
    offsets. Terms with zero weight are not evaluated.
    """
    lc = loss_classification(probs, labels)
    ln = loss_actionness(q, np.asarray(labels) != 0) if spec.beta else 0.0
    lr = 0.0
    if spec.alpha and covered:
        reps = [spec.rep(key) for key, _, _ in covered]
        lr = loss_full_rep(hidden, [(lo, hi) for _, lo, hi in covered], reps, W)
    out = combine_losses(lc, lr, ln, spec)
    return out.total, out


def classification_grad(probs, labels, scale):
    """Loss sum (times ``scale``) and its gradient w.r.t. the logits.

    ``probs`` (N, K) softmax outputs, ``labels`` (N,). A floored probability
    makes its frame's term constant, so that frame gets zero gradient.
    """
    n = probs.shape[0]
    picked = probs[np.arange(n), labels]
    if np.any(labels < 0) or np.any(labels >= probs.shape[1]):
        raise LossError(f"label outside [0, {probs.shape[1] - 1}]")
    loss = -float(np.sum(np.log(np.maximum(picked, PROB_FLOOR)))) * scale
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad[picked < PROB_FLOOR] = 0.0
    return loss, grad * scale


def actionness_grad(q, targets, scale):
    """Loss sum (times ``scale``) and gradient w.r.t. the two actionness
    logits ``(background, action)``."""
    y = targets.astype(np.float64)
    keep1 = q >= PROB_FLOOR
    keep0 = (1 - q) >= PROB_FLOOR
    ll = y * np.log(np.maximum(q, PROB_FLOOR)) + (1 - y) * np.log(np.maximum(1 - q, PROB_FLOOR))
    loss = -float(np.sum(ll)) * scale
    g1 = (-y * (1 - q) * keep1 + (1 - y) * q * keep0) * scale
    return loss, np.stack([-g1, g1], axis=-1)


def full_rep_grad(hidden, intervals, reps, W, scale):
    """Loss (times ``scale``) plus gradients w.r.t. ``hidden`` and ``W``."""
    dh = np.zeros_like(hidden)
    dW = np.zeros_like(W)
    total, count = 0.0, 0
    for (lo, hi), _ in zip(intervals, reps):
        count += max(hi - lo, 0)
    if count == 0:
        return 0.0, dh, dW
    for (lo, hi), target in zip(intervals, reps):
        if hi <= lo:
            continue
        h = hidden[lo:hi]
        resid = h @ W.T - target
        total += float(np.sum(resid * resid))
        coef = 2.0 * scale / count
        dh[lo:hi] += coef * (resid @ W)
        dW += coef * (resid.T @ h)
    return total * scale / count, dh, dW
