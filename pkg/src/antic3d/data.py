"""Sequence/instance data model, label derivation, file I/O and synthetic data.

Frame indices are 1-based and inclusive everywhere they cross an interface
(files, reports, ``ActionInstance``); arrays are indexed 0-based internally.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ActionInstance",
    "UntrimmedSequence",
    "DatasetManifest",
    "SynthConfig",
    "DataError",
    "derive_frame_labels",
    "load_sequence",
    "load_split",
    "read_manifest",
    "write_manifest",
    "write_sequence",
    "format_labels",
    "synth_generate",
    "write_dataset",
    "normalize_clip",
    "StreamNormalizer",
]


class DataError(ValueError):
    """Malformed or inconsistent sequence data."""


@dataclass(frozen=True, order=True)
class ActionInstance:
    start: int
    end: int
    class_id: int

    def __post_init__(self):
        if self.start < 1:
            raise DataError(f"instance start must be >= 1, got {self.start}")
        if self.end <= self.start:
            raise DataError(f"instance needs start < end, got ({self.start}, {self.end})")

    @property
    def tau(self) -> int:
        """Instance length as ``end - start``."""
        return self.end - self.start

    @property
    def n_frames(self) -> int:
        return self.end - self.start + 1


def _check_instances(instances: Sequence[ActionInstance], T: int | None = None) -> None:
    for prev, nxt in zip(instances, instances[1:]):
        if nxt.start <= prev.end:
            raise DataError(
                f"overlapping instances {(prev.start, prev.end, prev.class_id)} and "
                f"{(nxt.start, nxt.end, nxt.class_id)} (frame {nxt.start})"
            )
    if T is not None:
        for inst in instances:
            if inst.end > T:
                raise DataError(f"instance {(inst.start, inst.end, inst.class_id)} ends after T={T}")


@dataclass
class UntrimmedSequence:
    """A long skeleton video with non-overlapping annotated instances.

    ``frames`` has shape ``(T, J*D*P)``.
    """

    frames: np.ndarray
    instances: list[ActionInstance] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise DataError(f"frames must be 2-D (T, dim), got shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise DataError(f"sequence {self.name!r} has non-finite coordinates")
        self.instances = sorted(self.instances)
        _check_instances(self.instances, self.T)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_dim(self) -> int:
        return self.frames.shape[1]

    def instance_key(self, index: int) -> str:
        return f"{self.name}:{index}"


def derive_frame_labels(seq: UntrimmedSequence, num_classes: int) -> np.ndarray:
    """Per-frame labels over {0=background, 1..C}, length T (0-based array)."""
    instances = sorted(seq.instances)
    _check_instances(instances, seq.T)
    labels = np.zeros(seq.T, dtype=np.int64)
    for inst in instances:
        if not 1 <= inst.class_id <= num_classes:
            raise DataError(f"class id {inst.class_id} outside [1, {num_classes}]")
        labels[inst.start - 1 : inst.end] = inst.class_id
    return labels


# --------------------------------------------------------------------------
# manifest and text formats


@dataclass
class DatasetManifest:
    num_classes: int
    joints: int
    dims: int = 3
    persons: int = 1
    train: list[tuple[str, str]] = field(default_factory=list)
    test: list[tuple[str, str]] = field(default_factory=list)
    root: str = "."

    def __post_init__(self):
        if self.num_classes < 1:
            raise DataError("manifest needs classes >= 1")
        if min(self.joints, self.dims, self.persons) < 1:
            raise DataError("manifest joints/dims/persons must be positive")

    @property
    def frame_dim(self) -> int:
        return self.joints * self.dims * self.persons

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.root, path)


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Parse a ``key = value`` manifest. ``train``/``test`` lines may repeat,
    each holding ``skeleton_file,label_file``."""
    path = Path(path)
    scalars: dict[str, int] = {}
    splits: dict[str, list[tuple[str, str]]] = {"train": [], "test": []}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in splits:
                parts = [p.strip() for p in value.split(",")]
                if len(parts) != 2 or not all(parts):
                    raise DataError(f"{path}:{lineno}: expected 'skeleton,label' pair")
                splits[key].append((parts[0], parts[1]))
            elif key in ("classes", "joints", "dims", "persons"):
                try:
                    scalars[key] = int(value)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: {key} must be an integer") from None
            else:
                raise DataError(f"{path}:{lineno}: unknown manifest key {key!r}")
    for key in ("classes", "joints"):
        if key not in scalars:
            raise DataError(f"{path}: missing required key {key!r}")
    return DatasetManifest(
        num_classes=scalars["classes"],
        joints=scalars["joints"],
        dims=scalars.get("dims", 3),
        persons=scalars.get("persons", 1),
        train=splits["train"],
        test=splits["test"],
        root=str(path.parent),
    )


def write_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    lines = [
        f"classes = {manifest.num_classes}",
        f"joints = {manifest.joints}",
        f"dims = {manifest.dims}",
        f"persons = {manifest.persons}",
    ]
    lines += [f"train = {s},{l}" for s, l in manifest.train]
    lines += [f"test = {s},{l}" for s, l in manifest.test]
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_skeleton(path: str, frame_dim: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != frame_dim:
                raise DataError(
                    f"{path}:{lineno}: expected {frame_dim} floats, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise DataError(f"{path}: no frames")
    return np.asarray(rows, dtype=np.float64)


def _parse_labels(path: str, T: int, num_classes: int) -> list[ActionInstance]:
    instances = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            # PKU-MMD appends a confidence column; anything past the third is ignored.
            parts = [p.strip() for p in line.split(",")]
            if len(parts) < 3:
                raise DataError(f"{path}:{lineno}: expected 'class_id,start,end'")
            try:
                cls, start, end = (int(float(p)) for p in parts[:3])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer label field") from None
            if not 1 <= start <= T or not 1 <= end <= T:
                raise DataError(f"{path}:{lineno}: frame index outside [1, {T}]")
            if not 1 <= cls <= num_classes:
                raise DataError(f"{path}:{lineno}: class id {cls} outside [1, {num_classes}]")
            try:
                instances.append(ActionInstance(start, end, cls))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return instances


def load_sequence(skeleton_path, label_path, manifest: DatasetManifest) -> UntrimmedSequence:
    skeleton_path = manifest.resolve(str(skeleton_path))
    label_path = manifest.resolve(str(label_path))
    frames = _parse_skeleton(skeleton_path, manifest.frame_dim)
    instances = _parse_labels(label_path, frames.shape[0], manifest.num_classes)
    name = Path(skeleton_path).stem
    return UntrimmedSequence(frames, instances, name=name)


def load_split(manifest: DatasetManifest, split: str) -> list[UntrimmedSequence]:
    pairs = {"train": manifest.train, "test": manifest.test}[split]
    return [load_sequence(s, l, manifest) for s, l in pairs]


def format_labels(instances: Sequence[ActionInstance]) -> str:
    return "".join(f"{i.class_id},{i.start},{i.end}\n" for i in sorted(instances))


def write_sequence(seq: UntrimmedSequence, skeleton_path, label_path) -> None:
    # repr() round-trips float64 exactly
    with open(skeleton_path, "w") as fh:
        for row in seq.frames:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")
    Path(label_path).write_text(format_labels(seq.instances))


# --------------------------------------------------------------------------
# normalization


def _origin_mask(frame_dim: int, joints: int, dims: int) -> tuple[int, int]:
    persons = frame_dim // (joints * dims)
    if persons * joints * dims != frame_dim:
        raise DataError(f"frame dim {frame_dim} is not a multiple of joints*dims")
    return persons, joints * dims


def normalize_clip(frames: np.ndarray, joints: int, dims: int = 3) -> np.ndarray:
    """Subtract the first frame's first-joint position from every joint.

    Layout per frame is person-major, then joint, then coordinate. Person
    blocks that are all zero in a frame (absent person) stay zero.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] == 0:
        return frames.copy()
    persons, block = _origin_mask(frames.shape[1], joints, dims)
    origin = frames[0, :dims]
    out = frames.reshape(frames.shape[0], persons, joints, dims).copy()
    present = np.any(out != 0.0, axis=(2, 3))
    out[present] -= origin
    return out.reshape(frames.shape)


class StreamNormalizer:
    """Online counterpart of :func:`normalize_clip`: the origin is taken from
    the first frame seen."""

    def __init__(self, joints: int, dims: int = 3, enabled: bool = True):
        self.joints = joints
        self.dims = dims
        self.enabled = enabled
        self.origin: np.ndarray | None = None

    def reset(self) -> None:
        self.origin = None

    def __call__(self, frame: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64)
        if not self.enabled:
            return frame
        if self.origin is None:
            self.origin = frame[: self.dims].copy()
        persons, _ = _origin_mask(frame.shape[0], self.joints, self.dims)
        out = frame.reshape(persons, self.joints, self.dims).copy()
        present = np.any(out != 0.0, axis=(1, 2))
        out[present] -= self.origin
        return out.reshape(frame.shape)


# --------------------------------------------------------------------------
# synthetic data


@dataclass
class SynthConfig:
    num_classes: int = 5
    joints: int = 4
    dims: int = 3
    persons: int = 1
    n_train: int = 20
    n_test: int = 5
    seq_len: int = 600
    min_instances: int = 3
    max_instances: int = 4
    min_len: int = 80
    max_len: int = 120
    noise: float = 0.02
    amplitude: float = 1.0
    translation: float = 1.0

    def validate(self) -> None:
        if self.num_classes < 1 or self.joints < 1 or self.dims < 1 or self.persons < 1:
            raise DataError("synth: classes, joints, dims and persons must be positive")
        if self.min_instances < 0 or self.max_instances < self.min_instances:
            raise DataError("synth: need 0 <= min_instances <= max_instances")
        if self.min_len < 2 or self.max_len < self.min_len:
            raise DataError("synth: need 2 <= min_len <= max_len")
        n = self.max_instances
        if n and n * self.min_len + (n - 1) > self.seq_len:
            raise DataError(
                f"synth: {n} instances of length >= {self.min_len} cannot fit "
                f"in T={self.seq_len} with 1-frame gaps"
            )


def _class_patterns(cfg: SynthConfig, rng: np.random.Generator):
    shape = (cfg.num_classes, cfg.joints, cfg.dims)
    # joint 0 is the root; it drifts little so translation normalization is stable
    amp = rng.uniform(0.5, 1.0, size=shape) * cfg.amplitude
    amp[:, 0, :] *= 0.1
    freq = rng.uniform(1.0 / 60.0, 1.0 / 15.0, size=shape)
    phase = rng.uniform(0.0, 2 * np.pi, size=shape)
    return amp, freq, phase


def _pack_instances(cfg: SynthConfig, rng: np.random.Generator) -> list[ActionInstance]:
    n = int(rng.integers(cfg.min_instances, cfg.max_instances + 1))
    if n == 0:
        return []
    lengths = rng.integers(cfg.min_len, cfg.max_len + 1, size=n)
    slack = cfg.seq_len - int(lengths.sum()) - (n - 1)
    if slack < 0:
        lengths = np.full(n, cfg.min_len)
        slack = cfg.seq_len - int(lengths.sum()) - (n - 1)
    # split the slack over n+1 gaps uniformly at random (stars and bars)
    cuts = np.sort(rng.integers(0, slack + 1, size=n))
    gaps = np.diff(np.concatenate([[0], cuts]))
    classes = rng.integers(1, cfg.num_classes + 1, size=n)
    instances = []
    pos = 1
    for k in range(n):
        pos += int(gaps[k]) + (1 if k else 0)
        start = pos
        end = start + int(lengths[k]) - 1
        instances.append(ActionInstance(start, end, int(classes[k])))
        pos = end + 1
    return instances


def _render(cfg, instances, patterns, rest, rng) -> np.ndarray:
    amp, freq, phase = patterns
    T = cfg.seq_len
    pose = np.broadcast_to(rest, (T, cfg.joints, cfg.dims)).copy()
    for inst in instances:
        u = np.arange(inst.n_frames, dtype=np.float64)[:, None, None]
        c = inst.class_id - 1
        motion = amp[c] * np.sin(2 * np.pi * freq[c] * u + phase[c])
        pose[inst.start - 1 : inst.end] += motion
    pose += rng.normal(0.0, cfg.noise, size=pose.shape)
    pose += rng.uniform(-cfg.translation, cfg.translation, size=cfg.dims)
    frames = np.zeros((T, cfg.persons, cfg.joints, cfg.dims))
    frames[:, 0] = pose
    return frames.reshape(T, -1)


def synth_generate(cfg: SynthConfig, seed: int):
    """Generate ``(train, test, manifest)``; a pure function of ``(cfg, seed)``.

    Each class is a fixed per-joint sinusoid (amplitude, frequency, phase)
    added to a rest pose; background frames are noise around the rest pose.
    The returned manifest has empty file lists; :func:`write_dataset` fills
    them in.
    """
    cfg.validate()
    root = np.random.SeedSequence(seed)
    pattern_ss, seq_ss = root.spawn(2)
    prng = np.random.default_rng(pattern_ss)
    patterns = _class_patterns(cfg, prng)
    rest = prng.normal(0.0, 0.5, size=(cfg.joints, cfg.dims))
    rest[0] = 0.0

    seqs = []
    n_total = cfg.n_train + cfg.n_test
    for k, ss in enumerate(seq_ss.spawn(n_total)):
        rng = np.random.default_rng(ss)
        instances = _pack_instances(cfg, rng)
        frames = _render(cfg, instances, patterns, rest, rng)
        split = "train" if k < cfg.n_train else "test"
        idx = k if k < cfg.n_train else k - cfg.n_train
        seqs.append(UntrimmedSequence(frames, instances, name=f"{split}_{idx:04d}"))
    manifest = DatasetManifest(cfg.num_classes, cfg.joints, cfg.dims, cfg.persons)
    return seqs[: cfg.n_train], seqs[cfg.n_train :], manifest


def write_dataset(out_dir, train, test, manifest: DatasetManifest) -> DatasetManifest:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs: dict[str, list[tuple[str, str]]] = {"train": [], "test": []}
    for split, seqs in (("train", train), ("test", test)):
        for seq in seqs:
            skel, lab = f"{seq.name}.skeleton", f"{seq.name}.label"
            write_sequence(seq, out / skel, out / lab)
            pairs[split].append((skel, lab))
    written = DatasetManifest(
        manifest.num_classes,
        manifest.joints,
        manifest.dims,
        manifest.persons,
        train=pairs["train"],
        test=pairs["test"],
        root=str(out),
    )
    write_manifest(written, out / "manifest.txt")
    return written
