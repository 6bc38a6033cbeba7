"""Binary checkpoint container.

Layout (all integers little-endian)::

    magic     8 bytes  b"ANTIC3D\\x00"
    version   u32
    cfg_len   u64, then cfg_len bytes of UTF-8 JSON (config snapshot)
    n_arrays  u32
    per array:
        name_len u16, name (UTF-8)
        ndim     u8, then ndim x u64 dims
        data     prod(dims) x float64 little-endian, C order
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct

import numpy as np

from .model.params import ModelParams

__all__ = [
    "MAGIC",
    "VERSION",
    "CheckpointError",
    "dump_container",
    "parse_container",
    "save_container",
    "load_container",
    "save_params",
    "load_params",
    "file_hash",
]

MAGIC = b"ANTIC3D\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dump_container(arrays: dict[str, np.ndarray], config: dict) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    cfg = json.dumps(config, sort_keys=True).encode()
    buf.write(struct.pack("<Q", len(cfg)))
    buf.write(cfg)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        raw = name.encode()
        arr = np.asarray(arr, dtype="<f8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes())
    return buf.getvalue()


def parse_container(data: bytes):
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        out = view[pos : pos + n]
        pos += n
        return out

    if bytes(take(len(MAGIC))) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic header)")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack("<Q", take(8))
    config = json.loads(bytes(take(cfg_len)).decode())
    (n,) = struct.unpack("<I", take(4))
    arrays = {}
    for _ in range(n):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        count = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(view):
        raise CheckpointError("trailing bytes after last array")
    return arrays, config


def save_container(path, arrays, config) -> str:
    data = dump_container(arrays, config)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def load_container(path):
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        return parse_container(fh.read())


def file_hash(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def save_params(path, params: ModelParams, run_config: dict | None = None) -> str:
    config = {"kind": "model", "model": params.config(), "run": run_config or {}}
    return save_container(path, params.arrays, config)


def load_params(path):
    """Return ``(params, config)`` from a model checkpoint."""
    arrays, config = load_container(path)
    if config.get("kind") != "model":
        raise CheckpointError(f"{path} is not a model checkpoint")
    m = config["model"]
    params = ModelParams(m["input_dim"], m["hidden"], m["layers"], m["num_classes"], arrays)
    return params, config
