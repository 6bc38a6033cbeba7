import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from antic3d.cli import main
from antic3d.data import load_split, read_manifest
from antic3d.evaluation import read_report_csv

SYNTH = ["--n-train", "3", "--n-test", "2", "--seq-len", "200", "--min-instances", "1", "--max-instances", "2",
         "--min-len", "30", "--max-len", "50", "--joints", "2"]
SMALL = ["--hidden", "6", "--layers", "2", "--epochs", "2", "--clip-len", "20", "--context-window", "5",
         "--batch-size", "4"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "data"), "--seed", "2", *SYNTH]) == 0
    manifest = str(root / "data" / "manifest.txt")
    assert main(["train-teacher", "--manifest", manifest, "--seed", "1", "--out-dir", str(root / "t"), *SMALL]) == 0
    assert main(["train", "--manifest", manifest, "--seed", "1", "--out-dir", str(root / "s"),
                 "--teacher", str(root / "t" / "teacher_reps.ckpt"), *SMALL]) == 0
    return root


def test_synth_is_reproducible(tmp_path, capsys):
    for d in ("a", "b"):
        code, out, _ = run(["synth", "--out", str(tmp_path / d), "--seed", "4", *SYNTH], capsys)
        assert code == 0
    assert "instance length histogram" in out
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    seqs = load_split(read_manifest(tmp_path / "a" / "manifest.txt"), "train")
    assert len(seqs) == 3 and all(30 <= i.n_frames <= 50 for s in seqs for i in s.instances)


def test_train_writes_log_and_checkpoints(workdir):
    rows = list(csv.reader((workdir / "s" / "train_log.csv").open()))
    assert rows[0] == ["epoch", "L_c", "L_r", "L_n", "total"]
    assert [r[0] for r in rows[1:]] == ["1", "2"]
    assert all(float(r[2]) > 0 and float(r[3]) > 0 for r in rows[1:])
    assert (workdir / "s" / "final.ckpt").exists() and (workdir / "s" / "best.ckpt").exists()


def test_train_base_model_zero_aux_columns(workdir, tmp_path, capsys):
    manifest = str(workdir / "data" / "manifest.txt")
    code, _, _ = run(["train", "--manifest", manifest, "--seed", "1", "--alpha", "0", "--beta", "0",
                      "--out-dir", str(tmp_path), *SMALL], capsys)
    assert code == 0
    rows = list(csv.reader((tmp_path / "train_log.csv").open()))[1:]
    assert all(r[2] == "0.0" and r[3] == "0.0" and r[1] == r[4] for r in rows)


def test_train_without_teacher_fails_at_startup(workdir, tmp_path, capsys):
    manifest = str(workdir / "data" / "manifest.txt")
    code, _, err = run(["train", "--manifest", manifest, "--seed", "1", "--out-dir", str(tmp_path), *SMALL], capsys)
    assert code != 0
    assert err.count("\n") == 1 and err.startswith("antic3d: error: ConfigError:")
    assert not (tmp_path / "train_log.csv").exists()


def test_missing_seed_is_an_error(workdir, capsys):
    code, _, err = run(["train", "--manifest", str(workdir / "data" / "manifest.txt")], capsys)
    assert code == 1 and "seed" in err


def test_eval_report_and_dump(workdir, tmp_path, capsys):
    code, out, _ = run(["eval", "--checkpoint", str(workdir / "s" / "final.ckpt"),
                        "--dump", str(tmp_path / "d.csv")], capsys)
    assert code == 0
    report = read_report_csv(out)
    assert report.M == 10 and report.anticipation_acc.shape == (9,)
    dump = list(csv.reader((tmp_path / "d.csv").open()))
    assert dump[0] == ["sequence", "frame", "true_label", "argmax", "p_max", "q"]
    assert len(dump) - 1 == 2 * 200


def test_eval_options(workdir, capsys):
    code, out, _ = run(["eval", "--checkpoint", str(workdir / "s" / "final.ckpt"), "--test-mode", "stitch",
                        "--M", "5", "--label-rule", "mean"], capsys)
    assert code == 0
    assert read_report_csv(out).anticipation_acc.shape == (4,)


def test_stream_matches_eval_dump(workdir, tmp_path, capsys):
    ckpt = str(workdir / "s" / "final.ckpt")
    assert main(["eval", "--checkpoint", ckpt, "--dump", str(tmp_path / "d.csv")]) == 0
    capsys.readouterr()
    skeleton = workdir / "data" / "test_0000.skeleton"
    proc = subprocess.run([sys.executable, "-m", "antic3d.cli", "stream", "--checkpoint", ckpt,
                           "--input", str(skeleton)], capture_output=True, text=True, check=True)
    rows = list(csv.reader(io.StringIO(proc.stdout)))
    assert rows[0] == ["frame", "argmax", "p_max", "q"]
    dump = [r for r in csv.reader((tmp_path / "d.csv").open()) if r[0] == "test_0000"]
    assert len(rows) - 1 == len(dump) == 200
    assert [r for r in rows[1:]] == [[d[1], d[3], d[4], d[5]] for d in dump]


def test_stream_emits_before_reading_ahead(workdir):
    ckpt = str(workdir / "s" / "final.ckpt")
    lines = (workdir / "data" / "test_0001.skeleton").read_text().splitlines()
    proc = subprocess.Popen([sys.executable, "-m", "antic3d.cli", "stream", "--checkpoint", ckpt],
                            stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
    try:
        assert proc.stdout.readline().strip() == "frame,argmax,p_max,q"
        for t in range(3):
            proc.stdin.write(lines[t] + "\n")
            proc.stdin.flush()
            row = proc.stdout.readline().strip().split(",")
            assert row[0] == str(t + 1)
            assert 0.0 <= float(row[2]) <= 1.0
        proc.stdin.close()
        assert proc.stdout.read() == ""
        assert proc.wait(timeout=30) == 0
    finally:
        proc.kill()


def test_stream_closed_reader_exits_quietly(workdir):
    ckpt = str(workdir / "s" / "final.ckpt")
    proc = subprocess.Popen([sys.executable, "-m", "antic3d.cli", "stream", "--checkpoint", ckpt,
                             "--input", str(workdir / "data" / "test_0001.skeleton")],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    proc.stdout.readline()
    proc.stdout.close()
    err = proc.stderr.read()
    assert proc.wait(timeout=60) == 0
    assert err == ""


def test_stream_dimension_mismatch(workdir, tmp_path):
    bad = tmp_path / "bad.skeleton"
    bad.write_text("1 2 3\n")
    proc = subprocess.run([sys.executable, "-m", "antic3d.cli", "stream", "--checkpoint",
                           str(workdir / "s" / "final.ckpt"), "--input", str(bad)], capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr.strip().startswith("antic3d: error: DataError: line 1")


def test_sweep_table(workdir, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _, _ = run(["sweep", "--manifest", str(workdir / "data" / "manifest.txt"), "--seed", "3",
                      "--alpha", "0", "--axis", "clip_len", "--values", "10,20", "--out", str(out),
                      "--hidden", "4", "--layers", "1", "--epochs", "1"], capsys)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["value", "0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9",
                       "avg_acc_w_bg", "avg_acc_wo_bg"]
    assert [r[0] for r in rows[1:]] == ["10", "20"]


def test_sweep_failure_keeps_partial_rows(workdir, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    # the second clip length exceeds the sequences and fails mid-sweep
    code, _, err = run(["sweep", "--manifest", str(workdir / "data" / "manifest.txt"), "--seed", "3",
                        "--alpha", "0", "--axis", "clip_len", "--values", "10,500", "--out", str(out),
                        "--hidden", "4", "--layers", "1", "--epochs", "1"], capsys)
    assert code == 1 and "SamplingError" in err
    rows = list(csv.reader(out.open()))
    assert len(rows) == 2 and rows[1][0] == "10"


def test_sweep_rejects_unknown_axis(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--seed", "1", "--axis", "lr", "--values", "1"])


def test_runs_are_reproducible(workdir, tmp_path):
    manifest = str(workdir / "data" / "manifest.txt")
    argv = ["train", "--manifest", manifest, "--seed", "5", "--alpha", "0", "--out-dir", str(tmp_path), *SMALL]
    outputs = []
    for _ in range(2):
        assert main(argv) == 0
        outputs.append([(tmp_path / f).read_bytes() for f in ("final.ckpt", "best.ckpt", "train_log.csv")])
    assert outputs[0] == outputs[1]


def test_trend_table(workdir, capsys):
    code, out, _ = run(["trend", "--manifest", str(workdir / "data" / "manifest.txt"), "--seed", "1",
                        "--seeds", "0", "--hidden", "4", "--layers", "1", "--epochs", "1", "--clip-len", "20",
                        "--teacher-epochs", "1"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "comparison,left,right,margin,holds"
    assert len(lines) == 3 and lines[1].startswith("acc@0.1 L=10 >= L=200")
