"""LSTM layer kernels, compiled when available.

Set ``ANTIC3D_BACKEND=python`` to force the NumPy fallback.
"""

import os

from . import _lstm_py

BACKEND = "python"
lstm_forward = _lstm_py.lstm_forward
lstm_backward = _lstm_py.lstm_backward

if os.environ.get("ANTIC3D_BACKEND", "").lower() != "python":
    try:
        from . import _lstm_ext
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        lstm_forward = _lstm_ext.lstm_forward
        lstm_backward = _lstm_ext.lstm_backward


def get_backend(name):
    """Return ``(forward, backward)`` for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _lstm_py.lstm_forward, _lstm_py.lstm_backward
    if name == "cython":
        from . import _lstm_ext

        return _lstm_ext.lstm_forward, _lstm_ext.lstm_backward
    raise ValueError(f"unknown backend {name!r}")
