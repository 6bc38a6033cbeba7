import numpy as np
import pytest

from antic3d.data import ActionInstance, SynthConfig, UntrimmedSequence, synth_generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_synth():
    cfg = SynthConfig(n_train=4, n_test=2, seq_len=200, min_instances=1, max_instances=2, min_len=30, max_len=50)
    return cfg, synth_generate(cfg, seed=7)


def make_sequence(T, instances, dim=6, seed=0, name="seq"):
    frames = np.random.default_rng(seed).normal(size=(T, dim))
    return UntrimmedSequence(frames, [ActionInstance(*i) for i in instances], name=name)


def random_case(rng, alpha=None, beta=None, max_hidden=16, max_len=8):
    """A random small model, batch and loss spec for gradient checks."""
    from antic3d.losses.terms import LossSpec
    from antic3d.model import Batch, init_params

    H = int(rng.integers(1, max_hidden + 1))
    layers = int(rng.integers(1, 4))
    C = int(rng.integers(1, 6))
    L = int(rng.integers(2, max_len + 1))
    B = int(rng.integers(1, 4))
    D = int(rng.integers(2, 7))
    alpha = float(rng.integers(0, 2)) if alpha is None else alpha
    beta = float(rng.integers(0, 2)) if beta is None else beta
    params = init_params(D, H, layers, C, rng)
    frames = rng.normal(size=(L, B, D))
    labels = rng.integers(0, C + 1, size=(L, B))
    covered, reps = [], {}
    for b in range(B):
        lo = int(rng.integers(0, L))
        hi = int(rng.integers(lo + 1, L + 1))
        key = f"s{b}:0"
        covered.append([(key, lo, hi)])
        reps[key] = rng.normal(size=H)
    return params, Batch(frames, labels, covered), LossSpec(alpha, beta, reps)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, name, passed, detail=""):
        line = f"criterion {number} [{name}]: {'PASS' if passed else 'FAIL'}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
