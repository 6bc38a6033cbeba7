"""Command line entry point: ``antic3d <command> [options]``.

Every command exits 0 on success. Failures print a single line
``antic3d: error: <Kind>: <message>`` to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, load_params
from .config import ConfigError, RunConfig, read_config
from .data import DataError, StreamNormalizer, SynthConfig, derive_frame_labels, synth_generate, write_dataset
from .evaluation import EvalError, write_frame_dump, write_report_csv
from .experiments import SWEEP_AXES, load_dataset, run_eval, run_teacher, run_train, sweep, trend_report
from .losses.terms import LossError
from .model import OptimizerError, StreamState, stream_step
from .sampling import SamplingError

log = logging.getLogger("antic3d")

EXPECTED_ERRORS = (
    ConfigError,
    DataError,
    CheckpointError,
    EvalError,
    LossError,
    OptimizerError,
    SamplingError,
    OSError,
    ValueError,
)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value run configuration file")
    g = p.add_argument_group("run configuration overrides")
    for f in dataclasses.fields(RunConfig):
        g.add_argument(_flag(f.name), dest=f"cfg_{f.name}", metavar=f.name.upper(), default=None)


def _run_config(args) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    cfg = read_config(args.config, overrides)
    cfg.validate()
    if not cfg.manifest:
        raise ConfigError("manifest is required")
    return cfg


# --------------------------------------------------------------------------
# synth


def _histogram(lengths, width: int = 10) -> list[str]:
    if not lengths:
        return ["  (no instances)"]
    lo = min(lengths) // width * width
    hi = max(lengths) // width * width
    counts = {b: 0 for b in range(lo, hi + 1, width)}
    for n in lengths:
        counts[n // width * width] += 1
    peak = max(counts.values())
    return [f"  {b:>5}-{b + width - 1:<5} {c:>5} {'#' * max(1, round(40 * c / peak)) if c else ''}"
            for b, c in counts.items()]


def cmd_synth(args) -> None:
    kw = {f.name: getattr(args, f"syn_{f.name}") for f in dataclasses.fields(SynthConfig)
          if getattr(args, f"syn_{f.name}") is not None}
    cfg = SynthConfig(**kw)
    train, test, manifest = synth_generate(cfg, args.seed)
    written = write_dataset(args.out, train, test, manifest)
    seqs = train + test
    lengths = [i.n_frames for s in seqs for i in s.instances]
    per_class = np.bincount([i.class_id for s in seqs for i in s.instances], minlength=cfg.num_classes + 1)[1:]
    frames = sum(s.T for s in seqs)
    action = sum(lengths)
    print(f"manifest: {Path(written.root) / 'manifest.txt'}")
    print(f"sequences: {len(train)} train, {len(test)} test; frame dim {manifest.frame_dim}")
    print(f"instances: {len(lengths)}; per class {per_class.tolist()}")
    print(f"action frames: {action}/{frames} ({action / frames:.3f})")
    print("instance length histogram:")
    for line in _histogram(lengths):
        print(line)


# --------------------------------------------------------------------------
# training


def cmd_train_teacher(args) -> None:
    cfg = _run_config(args)
    data = load_dataset(cfg.manifest)
    result, store, acc = run_teacher(cfg, data, cfg.out_dir)
    last = result.history[-1].loss.classification if result.history else float("nan")
    print(f"teacher: {Path(cfg.out_dir) / 'teacher.ckpt'}")
    print(f"reps: {Path(cfg.out_dir) / 'teacher_reps.ckpt'} ({len(store)} instances)")
    print(f"final L_c {last:.6f}; held-out last-frame accuracy {acc:.4f}")


def cmd_train(args) -> None:
    cfg = _run_config(args)
    data = load_dataset(cfg.manifest)
    result = run_train(cfg, data, cfg.out_dir)
    out = Path(cfg.out_dir)
    print(f"log: {out / 'train_log.csv'}")
    print(f"final: {out / 'final.ckpt'}; best: {out / 'best.ckpt'} (epoch {result.best_epoch})")


# --------------------------------------------------------------------------
# evaluation


def _checkpoint_run(config: dict) -> dict:
    return config.get("run", {}) or {}


def cmd_eval(args) -> None:
    params, config = load_params(args.checkpoint)
    run = _checkpoint_run(config)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    cfg = RunConfig(**{k: v for k, v in run.items() if k in known})
    changes = {
        "manifest": args.manifest,
        "test_mode": args.test_mode,
        "obs_segments": args.M,
        "label_rule": args.label_rule,
        "stitch_stride": args.stride,
        "clip_len": args.clip_len,
    }
    cfg = cfg.replace(**{k: v for k, v in changes.items() if v is not None})
    if args.no_normalize:
        cfg = cfg.replace(normalize=False)
    if cfg.seed is None:
        cfg = cfg.replace(seed=0)
    cfg.validate()
    if not cfg.manifest:
        raise ConfigError("manifest is required (not stored in checkpoint)")
    data = load_dataset(cfg.manifest)
    seqs = data.test if args.split == "test" else data.train
    report, streams = run_eval(params, cfg, data, seqs)
    if args.out:
        with open(args.out, "w") as fh:
            write_report_csv(report, fh)
    else:
        write_report_csv(report, sys.stdout)
    if args.dump:
        tracks = [derive_frame_labels(s, data.manifest.num_classes) for s in seqs]
        with open(args.dump, "w") as fh:
            write_frame_dump(fh, [(s.name, st) for s, st in zip(seqs, streams)], tracks)


def _frame_lines(fh):
    # readline avoids the read-ahead buffering of file iteration
    while True:
        line = fh.readline()
        if not line:
            return
        yield line


def cmd_stream(args) -> None:
    params, config = load_params(args.checkpoint)
    run = _checkpoint_run(config)
    data_cfg = run.get("data", {})
    joints = args.joints or data_cfg.get("joints")
    dims = args.dims or data_cfg.get("dims", 3)
    normalize = run.get("normalize", True) and not args.no_normalize
    if normalize and not joints:
        raise ConfigError("joints unknown: pass --joints or use a checkpoint written by train")
    norm = StreamNormalizer(joints or 1, dims, enabled=normalize)
    state = StreamState.zeros(params)
    src = sys.stdin if args.input == "-" else open(args.input)
    out = sys.stdout
    try:
        out.write("frame,argmax,p_max,q\n")
        out.flush()
        t = 0
        for lineno, line in enumerate(_frame_lines(src), 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != params.input_dim:
                raise DataError(f"line {lineno}: expected {params.input_dim} floats, got {len(parts)}")
            try:
                frame = np.array([float(v) for v in parts])
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric value") from None
            state, p, q, _ = stream_step(params, state, norm(frame))
            t += 1
            k = int(np.argmax(p))
            out.write(f"{t},{k},{float(p[k])!r},{float(q)!r}\n")
            out.flush()
    finally:
        if src is not sys.stdin:
            src.close()


def _parse_values(axis: str, raw: str):
    cast = float if axis in ("alpha", "beta") else int
    try:
        return [cast(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad sweep values {raw!r}") from None


def cmd_sweep(args) -> None:
    cfg = _run_config(args)
    values = _parse_values(args.axis, args.values)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    data = load_dataset(cfg.manifest)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            sweep(cfg, data, args.axis, values, fh, seeds, args.teacher_epochs)
    else:
        sweep(cfg, data, args.axis, values, sys.stdout, seeds, args.teacher_epochs)


def cmd_trend(args) -> None:
    cfg = _run_config(args)
    seeds = [int(s) for s in args.seeds.split(",")]
    data = load_dataset(cfg.manifest)
    sweep_fh = open(args.sweep_out, "w") if args.sweep_out else None
    try:
        report = trend_report(cfg, data, seeds, sweep_fh, args.teacher_epochs)
    finally:
        if sweep_fh is not None:
            sweep_fh.close()
    report.write(sys.stdout)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="antic3d", description="Online 3D action anticipation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic skeleton dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    for f in dataclasses.fields(SynthConfig):
        p.add_argument(_flag(f.name), dest=f"syn_{f.name}", type=type(f.default), default=None,
                       help=f"default {f.default}")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-teacher", help="train the full-observation teacher")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("train", help="train the anticipation network")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", help="defaults to the manifest recorded in the checkpoint")
    p.add_argument("--split", choices=("test", "train"), default="test")
    p.add_argument("--test-mode", choices=("stream", "stitch"))
    p.add_argument("--M", type=int, help="number of observation segments")
    p.add_argument("--label-rule", choices=("last", "mean"))
    p.add_argument("--clip-len", type=int, help="window length for stitch mode")
    p.add_argument("--stride", type=int, help="window stride for stitch mode")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", help="report CSV path (default stdout)")
    p.add_argument("--dump", help="per-frame prediction CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stream", help="online per-frame inference")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", default="-", help="skeleton file, one frame per line ('-' for stdin)")
    p.add_argument("--joints", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("sweep", help="train and evaluate over one parameter")
    _add_run_flags(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--seeds", help="comma separated seeds averaged per value")
    p.add_argument("--teacher-epochs", type=int, help="epochs for teachers trained inside the sweep")
    p.add_argument("--out", help="table CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trend", help="clip-length and full-representation comparison over seeds")
    _add_run_flags(p)
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma separated seeds")
    p.add_argument("--teacher-epochs", type=int, help="epochs for the per-seed teachers")
    p.add_argument("--sweep-out", help="write the underlying sweep tables here")
    p.set_defaults(func=cmd_trend)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); not an error
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0
    except EXPECTED_ERRORS as exc:
        msg = " ".join(str(exc).split())
        print(f"antic3d: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("antic3d: error: KeyboardInterrupt: interrupted", file=sys.stderr)
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
