"""Run orchestration shared by the CLI: teacher/student training from a
:class:`RunConfig`, evaluation, and parameter sweeps."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import file_hash, load_container, load_params, save_params
from .config import ConfigError, RunConfig
from .data import DatasetManifest, UntrimmedSequence, load_split, read_manifest
from .evaluation import MetricsReport, evaluate, gamma_labels
from .losses.teacher import (
    TeacherRepStore,
    extract_full_reps,
    load_rep_store,
    save_rep_store,
    train_teacher,
    trimmed_instances,
)
from .losses.terms import LossSpec
from .model import ModelParams, forward_clip
from .sampling import SamplerConfig
from .training import LOG_COLUMNS, TrainResult, train_model

log = logging.getLogger(__name__)

__all__ = [
    "Dataset",
    "load_dataset",
    "sampler_config",
    "run_teacher",
    "resolve_teacher_reps",
    "run_train",
    "run_eval",
    "train_and_eval",
    "derived_seed",
    "sweep",
    "SWEEP_AXES",
    "sweep_header",
    "TrendReport",
    "trend_report",
]

SWEEP_AXES = ("clip_len", "context_window", "alpha", "beta")


@dataclass
class Dataset:
    manifest: DatasetManifest
    train: list[UntrimmedSequence]
    test: list[UntrimmedSequence]


def load_dataset(path) -> Dataset:
    manifest = read_manifest(path)
    return Dataset(manifest, load_split(manifest, "train"), load_split(manifest, "test"))


def sampler_config(cfg: RunConfig) -> SamplerConfig:
    return SamplerConfig(cfg.clip_len, cfg.context_window, cfg.sampler_mode, cfg.sw_stride)


def _data_config(m: DatasetManifest) -> dict:
    return {"classes": m.num_classes, "joints": m.joints, "dims": m.dims, "persons": m.persons}


def _snapshot(cfg: RunConfig, m: DatasetManifest) -> dict:
    run = cfg.to_dict()
    run["data"] = _data_config(m)
    return run


def _write_log(path, history) -> None:
    with open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for rec in history:
            w.writerow([rec.epoch, *(repr(float(v)) for v in rec.loss.as_row())])


def run_teacher(cfg: RunConfig, data: Dataset, out_dir=None):
    """Train the teacher on trimmed training instances, write its checkpoint
    and the representation store, and return ``(result, store, test_acc)``."""
    m = data.manifest
    items = trimmed_instances(data.train, m.joints, m.dims, cfg.normalize)
    result = train_teacher(
        items,
        m.num_classes,
        hidden=cfg.hidden,
        layers=cfg.layers,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        clip_norm=cfg.clip_norm,
        seed=cfg.seed,
    )
    held_out = trimmed_instances(data.test, m.joints, m.dims, cfg.normalize)
    hits = [int(np.argmax(forward_clip(result.params, it.frames).probs[-1])) == it.class_id for it in held_out]
    test_acc = float(np.mean(hits)) if hits else float("nan")
    store_hash = ""
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        store_hash = save_params(out / "teacher.ckpt", result.params, _snapshot(cfg, m))
        _write_log(out / "teacher_log.csv", result.history)
    store = extract_full_reps(result.params, items, store_hash)
    if out_dir is not None:
        save_rep_store(Path(out_dir) / "teacher_reps.ckpt", store)
    return result, store, test_acc


def resolve_teacher_reps(path, data: Dataset, cfg: RunConfig) -> TeacherRepStore:
    """Load a representation store, or build one from a teacher checkpoint."""
    if not path:
        raise ConfigError("alpha > 0 requires a teacher checkpoint or representation store")
    _, config = load_container(path)
    if config.get("kind") == "reps":
        return load_rep_store(path)
    teacher, _ = load_params(path)
    if teacher.hidden != cfg.hidden:
        raise ConfigError(f"teacher hidden size {teacher.hidden} != student hidden size {cfg.hidden}")
    m = data.manifest
    items = trimmed_instances(data.train, m.joints, m.dims, cfg.normalize)
    return extract_full_reps(teacher, items, file_hash(path))


def run_train(cfg: RunConfig, data: Dataset, out_dir=None, reps: TeacherRepStore | None = None) -> TrainResult:
    """Student training; checks teacher availability before the first epoch."""
    cfg.validate(check_paths=False)
    m = data.manifest
    if cfg.alpha and reps is None:
        reps = resolve_teacher_reps(cfg.teacher, data, cfg)
    spec = LossSpec(cfg.alpha, cfg.beta, dict(reps.reps) if reps is not None else None)
    log_fh = None
    writer = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        log_fh = open(out / "train_log.csv", "w")
        writer = csv.writer(log_fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)

    def on_epoch(rec, params):
        if writer is not None:
            writer.writerow([rec.epoch, *(repr(float(v)) for v in rec.loss.as_row())])
            log_fh.flush()

    try:
        result = train_model(
            data.train,
            m.num_classes,
            m.joints,
            m.dims,
            sampler_config(cfg),
            spec,
            hidden=cfg.hidden,
            layers=cfg.layers,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            clip_norm=cfg.clip_norm,
            seed=cfg.seed,
            normalize=cfg.normalize,
            on_epoch=on_epoch,
        )
    finally:
        if log_fh is not None:
            log_fh.close()
    if out_dir is not None:
        snap = _snapshot(cfg, m)
        save_params(Path(out_dir) / "final.ckpt", result.params, snap)
        save_params(Path(out_dir) / "best.ckpt", result.best, snap)
    return result


def run_eval(params: ModelParams, cfg: RunConfig, data: Dataset, sequences=None):
    m = data.manifest
    return evaluate(
        params,
        data.test if sequences is None else sequences,
        m.num_classes,
        m.joints,
        m.dims,
        M=cfg.obs_segments,
        rule=cfg.label_rule,
        mode=cfg.test_mode,
        clip_len=cfg.clip_len,
        stride=cfg.stitch_stride or cfg.clip_len,
        normalize=cfg.normalize,
    )


def train_and_eval(cfg: RunConfig, data: Dataset, reps=None, out_dir=None) -> MetricsReport:
    result = run_train(cfg, data, out_dir, reps)
    report, _ = run_eval(result.params, cfg, data)
    return report


def derived_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence([base, index]).generate_state(1)[0])


def sweep_header(M: int) -> list[str]:
    return ["value", *gamma_labels(M), "avg_acc_w_bg", "avg_acc_wo_bg"]


def _report_row(value, reports: list[MetricsReport]) -> list:
    acc = np.mean([r.anticipation_acc for r in reports], axis=0)
    wbg = float(np.mean([r.avg_acc_with_bg for r in reports]))
    wobg = float(np.mean([r.avg_acc_without_bg for r in reports]))
    return [value, *(repr(float(a)) for a in acc), repr(wbg), repr(wobg)]


def _teacher_for_seed(cfg, data, seed, cache):
    if seed not in cache:
        tcfg = cfg.replace(seed=seed)
        _, store, _ = run_teacher(tcfg, data)
        cache[seed] = store
    return cache[seed]


def sweep(cfg: RunConfig, data: Dataset, axis: str, values, fh, seeds=None, teacher_epochs=None):
    """Train and evaluate once per value (and per seed), writing one table
    row per value averaged over seeds. Rows are flushed as they complete, so
    an aborted sweep leaves its finished rows in ``fh``.

    Without explicit ``seeds`` each value runs with a seed derived from
    ``(cfg.seed, value index)``. When ``alpha > 0`` and no teacher file is
    configured, a teacher is trained per seed.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    cfg.validate(check_paths=False)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(sweep_header(cfg.obs_segments))
    fh.flush()
    teachers: dict[int, TeacherRepStore] = {}
    rows = []
    for idx, value in enumerate(values):
        run_seeds = list(seeds) if seeds else [derived_seed(cfg.seed, idx)]
        reports = []
        for s in run_seeds:
            run_cfg = cfg.replace(**{axis: value, "seed": s})
            reps = None
            if run_cfg.alpha:
                if run_cfg.teacher:
                    reps = resolve_teacher_reps(run_cfg.teacher, data, run_cfg)
                else:
                    tcfg = run_cfg if teacher_epochs is None else run_cfg.replace(epochs=teacher_epochs)
                    reps = _teacher_for_seed(tcfg, data, s, teachers)
            reports.append(train_and_eval(run_cfg, data, reps))
        row = _report_row(value, reports)
        writer.writerow(row)
        fh.flush()
        rows.append((value, reports))
    return rows


@dataclass
class TrendReport:
    """Per-seed gamma=0.1 accuracies behind the two directional checks."""

    seeds: list[int]
    short_clip: list[float]
    long_clip: list[float]
    baseline: list[float]
    with_rep: list[float]
    short_len: int = 10
    long_len: int = 200
    tolerance: float = 0.02

    @property
    def clip_trend(self) -> bool:
        return float(np.mean(self.short_clip)) >= float(np.mean(self.long_clip))

    @property
    def rep_trend(self) -> bool:
        return float(np.mean(self.with_rep)) >= float(np.mean(self.baseline)) - self.tolerance

    def rows(self) -> list[list]:
        short, long_ = float(np.mean(self.short_clip)), float(np.mean(self.long_clip))
        base, rep = float(np.mean(self.baseline)), float(np.mean(self.with_rep))
        return [
            ["comparison", "left", "right", "margin", "holds"],
            [f"acc@0.1 L={self.short_len} >= L={self.long_len}", short, long_, short - long_, self.clip_trend],
            [f"acc@0.1 alpha=1 >= alpha=0 - {self.tolerance:g}", rep, base, rep - base + self.tolerance,
             self.rep_trend],
        ]

    def write(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        for row in self.rows():
            w.writerow([f"{v:.4f}" if isinstance(v, float) else v for v in row])


def trend_report(cfg: RunConfig, data: Dataset, seeds, sweep_fh=None, teacher_epochs=None,
                 short_len: int = 10, long_len: int = 200) -> TrendReport:
    """Clip-length and full-representation comparisons over ``seeds``.

    Runs a clip-length sweep ``{short, cfg.clip_len, long}`` of the base
    model (whose middle value is the baseline) and an ``alpha = 1`` run with a
    teacher trained per seed. The sweep tables go to ``sweep_fh`` if given.
    """
    seeds = list(seeds)
    sink = sweep_fh if sweep_fh is not None else io.StringIO()
    base = cfg.replace(alpha=0.0, beta=0.0, teacher="")
    rows = sweep(base, data, "clip_len", [short_len, cfg.clip_len, long_len], sink, seeds)
    per_seed = {v: [r.at(0.1) for r in reps] for v, reps in rows}
    rep_rows = sweep(cfg.replace(alpha=1.0, beta=0.0), data, "alpha", [1.0], sink, seeds, teacher_epochs)
    return TrendReport(
        seeds,
        per_seed[short_len],
        per_seed[long_len],
        per_seed[cfg.clip_len],
        [r.at(0.1) for r in rep_rows[0][1]],
        short_len,
        long_len,
    )
