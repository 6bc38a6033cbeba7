"""Parameter container for the stacked-LSTM anticipation network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ModelParams", "init_params", "param_shapes"]


def param_shapes(input_dim: int, hidden: int, layers: int, num_classes: int) -> dict[str, tuple]:
    """Ordered name -> shape table. ``num_classes`` excludes background."""
    shapes = {}
    d = input_dim
    for k in range(layers):
        shapes[f"lstm{k}.Wx"] = (d, 4 * hidden)
        shapes[f"lstm{k}.Wh"] = (hidden, 4 * hidden)
        shapes[f"lstm{k}.b"] = (4 * hidden,)
        d = hidden
    shapes["cls.W"] = (hidden, num_classes + 1)
    shapes["cls.b"] = (num_classes + 1,)
    shapes["act.W"] = (hidden, 2)
    shapes["act.b"] = (2,)
    shapes["proj.W"] = (hidden, hidden)
    return shapes


@dataclass
class ModelParams:
    input_dim: int
    hidden: int
    layers: int
    num_classes: int
    arrays: dict[str, np.ndarray]

    def __post_init__(self):
        expected = param_shapes(self.input_dim, self.hidden, self.layers, self.num_classes)
        if list(expected) != list(self.arrays):
            raise ValueError(f"parameter names {list(self.arrays)} do not match {list(expected)}")
        for name, shape in expected.items():
            arr = np.ascontiguousarray(self.arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name}: shape {arr.shape} != {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name}: non-finite values")
            self.arrays[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def shape_table(self) -> dict[str, tuple]:
        return {k: v.shape for k, v in self.arrays.items()}

    def replace(self, arrays: dict[str, np.ndarray]) -> "ModelParams":
        return ModelParams(self.input_dim, self.hidden, self.layers, self.num_classes, arrays)

    def copy(self) -> "ModelParams":
        return self.replace({k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def config(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "layers": self.layers,
            "num_classes": self.num_classes,
        }


def _orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def init_params(
    input_dim: int,
    hidden: int = 100,
    layers: int = 3,
    num_classes: int = 5,
    rng: np.random.Generator | int = 0,
    proj_noise: float = 0.01,
) -> ModelParams:
    """Input/head weights uniform in +-1/sqrt(fan_in), orthogonal recurrent
    blocks, forget-gate bias 1, projection near identity."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    arrays = {}
    for name, shape in param_shapes(input_dim, hidden, layers, num_classes).items():
        if name.endswith(".Wh"):
            arr = np.concatenate([_orthogonal(hidden, rng) for _ in range(4)], axis=1)
        elif name.endswith(".Wx") or name in ("cls.W", "act.W"):
            bound = 1.0 / np.sqrt(shape[0])
            arr = rng.uniform(-bound, bound, size=shape)
        elif name.startswith("lstm") and name.endswith(".b"):
            arr = np.zeros(shape)
            arr[hidden : 2 * hidden] = 1.0
        elif name == "proj.W":
            arr = np.eye(hidden) + rng.normal(0.0, proj_noise, size=shape)
        else:
            arr = np.zeros(shape)
        arrays[name] = arr
    return ModelParams(input_dim, hidden, layers, num_classes, arrays)
