import math

import numpy as np
import pytest

from antic3d.losses.terms import (
    PROB_FLOOR,
    LossError,
    LossSpec,
    actionness_grad,
    classification_grad,
    combine_losses,
    full_rep_grad,
    loss_actionness,
    loss_classification,
    loss_full_rep,
    loss_total,
)


def test_uniform_classification_is_log_k():
    for C in (1, 4, 51):
        probs = np.full((7, C + 1), 1.0 / (C + 1))
        labels = np.arange(7) % (C + 1)
        assert abs(loss_classification(probs, labels) - math.log(C + 1)) <= 1e-9


def test_uniform_actionness_is_log_2():
    q = np.full(9, 0.5)
    assert abs(loss_actionness(q, np.arange(9) % 2) - math.log(2)) <= 1e-9


def test_classification_hand_value():
    probs = np.array([[0.7, 0.2, 0.1], [0.25, 0.25, 0.5]])
    want = -(math.log(0.2) + math.log(0.5)) / 2
    assert loss_classification(probs, np.array([1, 2])) == pytest.approx(want, abs=1e-15)


def test_classification_floor_and_zero_grad():
    probs = np.array([[1.0, 0.0], [0.5, 0.5]])
    assert loss_classification(probs, np.array([1, 0])) == pytest.approx(
        (-math.log(PROB_FLOOR) - math.log(0.5)) / 2
    )
    _, g = classification_grad(probs, np.array([1, 0]), 0.5)
    assert np.array_equal(g[0], np.zeros(2))
    assert np.allclose(g[1], [-0.25, 0.25])


def test_classification_bad_label():
    with pytest.raises(LossError):
        loss_classification(np.full((2, 3), 1 / 3), np.array([0, 3]))


def test_actionness_hand_value():
    q = np.array([0.9, 0.2])
    want = -(math.log(0.9) + math.log(0.8)) / 2
    assert loss_actionness(q, np.array([1, 0])) == pytest.approx(want, abs=1e-15)


def test_actionness_validation():
    with pytest.raises(LossError):
        loss_actionness(np.array([1.2]), np.array([1]))
    with pytest.raises(LossError):
        loss_actionness(np.array([0.5]), np.array([2]))


def test_full_rep_zero_at_identity():
    rng = np.random.default_rng(0)
    h_e = rng.normal(size=6)
    hidden = np.tile(h_e, (5, 1))
    assert loss_full_rep(hidden, [(0, 5)], [h_e], np.eye(6)) == 0.0


def test_full_rep_pools_covered_frames():
    W = np.eye(2)
    hidden = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 3.0]])
    # instance a covers frames 0..1 with target 0, instance b frame 2 with target (0, 1)
    got = loss_full_rep(hidden, [(0, 2), (2, 3)], [np.zeros(2), np.array([0.0, 1.0])], W)
    assert got == pytest.approx((1.0 + 0.0 + 4.0) / 3)


def test_full_rep_requires_coverage():
    with pytest.raises(LossError):
        loss_full_rep(np.zeros((3, 2)), [], [], np.eye(2))


def test_combine_zero_weights_exact():
    b = combine_losses(1.25, 9.0, 3.0, LossSpec(0.0, 0.0))
    assert b.full_rep == 0.0 and b.actionness == 0.0
    assert b.total == 1.25


def test_combine_weighted_sum():
    b = combine_losses(1.0, 2.0, 3.0, LossSpec(0.5, 2.0))
    assert b.total == pytest.approx(1.0 + 1.0 + 6.0)


def test_total_without_aux_equals_classification():
    rng = np.random.default_rng(3)
    p = rng.dirichlet(np.ones(4), size=12)
    y = rng.integers(0, 4, size=12)
    total, b = loss_total(p, y, LossSpec(0.0, 0.0))
    assert total == loss_classification(p, y)
    assert b.as_row()[1:3] == [0.0, 0.0]


def test_missing_rep_names_instance():
    spec = LossSpec(1.0, 0.0, {"a:0": np.zeros(3)})
    with pytest.raises(LossError, match="b:1"):
        spec.rep("b:1")


def test_negative_weight_rejected():
    with pytest.raises(LossError):
        LossSpec(-1.0, 0.0)


def _num_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + eps
        a = f()
        x[i] = old - eps
        b = f()
        x[i] = old
        g[i] = (a - b) / (2 * eps)
    return g


def test_classification_grad_matches_numeric():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(5, 4))
    y = rng.integers(0, 4, size=5)

    def f():
        e = np.exp(z - z.max(1, keepdims=True))
        return classification_grad(e / e.sum(1, keepdims=True), y, 0.2)[0]

    e = np.exp(z - z.max(1, keepdims=True))
    _, g = classification_grad(e / e.sum(1, keepdims=True), y, 0.2)
    assert np.allclose(g, _num_grad(f, z), atol=1e-8)


def test_actionness_grad_matches_numeric():
    rng = np.random.default_rng(2)
    z = rng.normal(size=(6, 2))
    y = rng.integers(0, 2, size=6).astype(bool)

    def q_of():
        e = np.exp(z - z.max(1, keepdims=True))
        return (e / e.sum(1, keepdims=True))[:, 1]

    _, g = actionness_grad(q_of(), y, 1 / 6)
    assert np.allclose(g, _num_grad(lambda: actionness_grad(q_of(), y, 1 / 6)[0], z), atol=1e-8)
    assert actionness_grad(q_of(), y, 1 / 6)[0] == pytest.approx(loss_actionness(q_of(), y))


def test_full_rep_grad_matches_numeric():
    rng = np.random.default_rng(4)
    h = rng.normal(size=(6, 3))
    W = rng.normal(size=(3, 3))
    reps = [rng.normal(size=3), rng.normal(size=3)]
    iv = [(0, 2), (3, 6)]
    loss, dh, dW = full_rep_grad(h, iv, reps, W, 0.5)
    assert loss == pytest.approx(0.5 * loss_full_rep(h, iv, reps, W))
    assert np.allclose(dh, _num_grad(lambda: full_rep_grad(h, iv, reps, W, 0.5)[0], h), atol=1e-7)
    assert np.allclose(dW, _num_grad(lambda: full_rep_grad(h, iv, reps, W, 0.5)[0], W), atol=1e-7)
