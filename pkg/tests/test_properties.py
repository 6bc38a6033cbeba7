import math
from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from antic3d.checkpoint import dump_container, parse_container
from antic3d.data import ActionInstance
from antic3d.evaluation import observation_frame, stitch_predictions
from antic3d.sampling import action_centric_start, sliding_window_starts


@st.composite
def instances(draw, max_T=500):
    T = draw(st.integers(2, max_T))
    s = draw(st.integers(1, T - 1))
    e = draw(st.integers(s + 1, T))
    return T, ActionInstance(s, e, 1)


@given(instances(), st.integers(2, 20), st.data())
def test_observation_frame_is_exact_floor(case, M, data):
    _, inst = case
    k = data.draw(st.integers(1, M - 1))
    t = observation_frame(inst, k, M)
    assert t == inst.start + math.floor(Fraction(k, M) * inst.tau)
    assert inst.start <= t < inst.end


@given(instances(), st.integers(1, 120), st.integers(0, 60), st.integers(0, 2**32 - 1))
def test_ac_start_is_valid(case, L, w, seed):
    T, inst = case
    if L > T:
        return
    s = action_centric_start(T, inst, L, w, np.random.default_rng(seed))
    assert 1 <= s <= T - L + 1
    lo, hi = max(1, inst.start - w), min(T, inst.end + w)
    if hi - lo + 1 >= L:
        assert lo <= s and s + L - 1 <= hi
    # every clip touches the context interval
    assert s <= hi and s + L - 1 >= lo


@given(st.integers(1, 400), st.integers(1, 100), st.integers(1, 100))
def test_sliding_windows_cover_sequence(T, L, stride):
    if L > T or stride > L:
        return
    starts = sliding_window_starts(T, L, stride)
    covered = np.zeros(T, bool)
    for s in starts:
        assert 1 <= s <= T - L + 1
        covered[s - 1 : s - 1 + L] = True
    assert covered.all()
    assert starts == sorted(set(starts))


@settings(max_examples=50)
@given(st.dictionaries(st.text(min_size=1, max_size=12), st.lists(st.integers(0, 4), min_size=0, max_size=3),
                       max_size=5), st.integers(0, 1000))
def test_container_round_trip(shapes, seed):
    rng = np.random.default_rng(seed)
    arrays = {k: rng.normal(size=tuple(v)) for k, v in shapes.items()}
    back, cfg = parse_container(dump_container(arrays, {"seed": seed}))
    assert cfg == {"seed": seed}
    assert list(back) == list(arrays)
    for k in arrays:
        assert back[k].shape == arrays[k].shape and np.array_equal(back[k], arrays[k])


@given(st.integers(5, 120), st.integers(1, 40), st.integers(1, 40))
def test_stitching_uses_earliest_window(T, L, stride):
    if L > T or stride > L:
        return
    starts = sliding_window_starts(T, L, stride)
    preds = []
    for j, s in enumerate(starts):
        probs = np.zeros((L, len(starts)))
        probs[:, j] = 1.0
        preds.append((probs, np.full(L, float(j))))
    stream = stitch_predictions(preds, starts, T)
    for t in range(1, T + 1):
        first = min(j for j, s in enumerate(starts) if s <= t <= s + L - 1)
        assert stream.q[t - 1] == first
