"""Run configuration: a flat ``key = value`` text file plus overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path

__all__ = ["ConfigError", "RunConfig", "read_config", "write_config", "parse_value"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    manifest: str = ""
    # sampling
    clip_len: int = 50
    context_window: int = 25
    sampler_mode: str = "AC"
    sw_stride: int = 50
    normalize: bool = True
    # model
    hidden: int = 100
    layers: int = 3
    # loss
    alpha: float = 1.0
    beta: float = 1.0
    teacher: str = ""
    # optimizer
    lr: float = 1e-3
    clip_norm: float = 5.0
    epochs: int = 30
    batch_size: int = 8
    seed: int | None = None
    out_dir: str = "runs/default"
    # evaluation
    obs_segments: int = 10
    label_rule: str = "last"
    test_mode: str = "stream"
    stitch_stride: int = 0

    def validate(self, check_paths: bool = True) -> None:
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be nonnegative")
        if self.hidden < 1 or self.layers < 1:
            raise ConfigError("hidden and layers must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.sampler_mode not in ("AC", "SW", "AC/SW"):
            raise ConfigError(f"sampler_mode must be AC, SW or AC/SW, got {self.sampler_mode!r}")
        if self.label_rule not in ("last", "mean"):
            raise ConfigError("label_rule must be 'last' or 'mean'")
        if self.test_mode not in ("stream", "stitch"):
            raise ConfigError("test_mode must be 'stream' or 'stitch'")
        if self.obs_segments < 2:
            raise ConfigError("obs_segments must be >= 2")
        if check_paths and self.manifest and not os.path.exists(self.manifest):
            raise ConfigError(f"manifest not found: {self.manifest}")
        if check_paths and self.teacher and not os.path.exists(self.teacher):
            raise ConfigError(f"teacher file not found: {self.teacher}")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, raw: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "int | None":
            return None if raw.lower() in ("", "none") else int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def read_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load ``path`` (optional) then apply ``overrides``; overrides win.

    Relative ``manifest``/``teacher`` paths in the file resolve against the
    file's directory.
    """
    values = {}
    if path is not None:
        base = Path(path).parent
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (s.strip() for s in line.split("=", 1))
                val = parse_value(key, raw)
                if key in ("manifest", "teacher") and val and not os.path.isabs(val):
                    val = str(base / val)
                values[key] = val
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        values[key] = parse_value(key, val) if isinstance(val, str) else val
    return RunConfig(**values)


def write_config(cfg: RunConfig, path) -> None:
    lines = []
    for key, val in cfg.to_dict().items():
        if isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{key} = {'' if val is None else val}")
    Path(path).write_text("\n".join(lines) + "\n")
