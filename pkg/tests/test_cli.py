import subprocess
import sys

import numpy as np
import pytest

from catdisc.cli import artifact, build_parser, load_partition, main
from catdisc.data import load_embeddings


def run_cli(*args):
    """In-process invocation; returns (exit_code, stdout) via capsys-free capture."""
    import contextlib
    import io

    out = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main(list(args))
        except SystemExit as e:  # argparse usage errors
            code = e.code
    return code, out.getvalue(), err.getvalue()


def synth_args(path, classes=6, per_class=12, dim=8, seed=3):
    return [
        "synth", "--classes", str(classes), "--per-class", str(per_class),
        "--dim", str(dim), "--seed", str(seed), "-o", str(path),
    ]


FAST_TRAIN = ["--epochs", "2", "--batch-size", "24", "--hidden-dim", "8",
              "--out-dim", "3", "--k-proto", "4"]


class TestSynth:
    def test_writes_expected_row_count(self, tmp_path):
        out = tmp_path / "d.gcde"
        code, stdout, _ = run_cli("synth", "--classes", "10", "--per-class", "50",
                                  "--dim", "16", "--seed", "1", "-o", str(out))
        assert code == 0
        assert load_embeddings(out).n == 500
        assert "N=500" in stdout

    def test_missing_required_flag_exits_2(self, tmp_path):
        code, _, _ = run_cli("synth", "--per-class", "5", "--dim", "4",
                             "-o", str(tmp_path / "d.gcde"))
        assert code == 2

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.gcde", tmp_path / "b.gcde"
        run_cli(*synth_args(a))
        run_cli(*synth_args(b))
        assert a.read_bytes() == b.read_bytes()

    def test_config_sidecar_written(self, tmp_path):
        out = tmp_path / "d.gcde"
        run_cli(*synth_args(out))
        assert (tmp_path / "d.gcde.config.txt").exists()


class TestTrain:
    def test_one_epoch_run(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli(*synth_args(data))
        out = tmp_path / "run"
        code, _, _ = run_cli("train", "--data", str(data), "-o", str(out),
                             "--epochs", "1", *FAST_TRAIN[2:])
        assert code == 0
        assert (out / "checkpoint.gcdh").exists()
        history = (out / "history.txt").read_text().splitlines()
        assert len(history) == 1
        assert history[0].startswith("epoch=0 ")
        assert (out / "config.txt").exists()

    def test_invalid_alpha_exits_2(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli(*synth_args(data))
        code, _, err = run_cli("train", "--data", str(data),
                               "-o", str(tmp_path / "r"), "--alpha", "2.0")
        assert code == 2
        assert "alpha" in err

    def test_same_seed_identical_checkpoint_bytes(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli(*synth_args(data))
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            code, _, _ = run_cli("train", "--data", str(data), "-o", str(out),
                                 "--seed", "5", *FAST_TRAIN)
            assert code == 0
            outs.append((out / "checkpoint.gcdh").read_bytes())
        assert outs[0] == outs[1]

    def test_config_file_with_flag_override(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli(*synth_args(data))
        cfg = tmp_path / "c.txt"
        cfg.write_text("epochs=1\nalpha=0.9\nhidden_dim=8\nout_dim=3\nk_proto=4\nbatch_size=24\n")
        out = tmp_path / "run"
        code, _, _ = run_cli("train", "--data", str(data), "-o", str(out),
                             "--config", str(cfg), "--alpha", "0.2")
        assert code == 0
        resolved = (out / "config.txt").read_text()
        assert "alpha=0.2" in resolved  # flag wins
        assert "epochs=1" in resolved


class TestAssignEval:
    @pytest.fixture
    def trained(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli(*synth_args(data, classes=4, per_class=15, dim=8))
        out = tmp_path / "run"
        run_cli("train", "--data", str(data), "-o", str(out), *FAST_TRAIN)
        return data, out / "checkpoint.gcdh"

    def test_assign_writes_partition_with_footer(self, tmp_path, trained):
        data, ckpt = trained
        part_file = tmp_path / "p.tsv"
        code, _, _ = run_cli("assign", "--checkpoint", str(ckpt), "--data", str(data),
                             "--m", "5", "-o", str(part_file))
        assert code == 0
        lines = part_file.read_text().splitlines()
        assert lines[-1].startswith("k=")
        assert len(lines) == 61  # 60 instances + footer
        part = load_partition(part_file)
        assert part.labels.shape == (60,)

    def test_assign_m_too_large_exits_2(self, tmp_path, trained):
        data, ckpt = trained
        code, _, _ = run_cli("assign", "--checkpoint", str(ckpt), "--data", str(data),
                             "--m", "60", "-o", str(tmp_path / "p.tsv"))
        assert code == 2

    def test_assign_rerun_identical(self, tmp_path, trained):
        data, ckpt = trained
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        run_cli("assign", "--checkpoint", str(ckpt), "--data", str(data), "-o", str(a))
        run_cli("assign", "--checkpoint", str(ckpt), "--data", str(data), "-o", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_graph_dump(self, tmp_path, trained):
        data, ckpt = trained
        dump = tmp_path / "g.tsv"
        run_cli("assign", "--checkpoint", str(ckpt), "--data", str(data),
                "-o", str(tmp_path / "p.tsv"), "--graph-dump", str(dump))
        first = dump.read_text().splitlines()[0].split("\t")
        assert len(first) == 3

    def test_eval_reports_keys(self, tmp_path, trained):
        data, ckpt = trained
        part_file = tmp_path / "p.tsv"
        run_cli("assign", "--checkpoint", str(ckpt), "--data", str(data), "-o", str(part_file))
        code, stdout, _ = run_cli("eval", "--partition", str(part_file), "--data", str(data))
        assert code == 0
        for key in ("acc_all=", "acc_known=", "acc_novel=", "k="):
            assert key in stdout

    def test_eval_mismatched_n_errors(self, tmp_path, trained):
        data, ckpt = trained
        part_file = tmp_path / "p.tsv"
        run_cli("assign", "--checkpoint", str(ckpt), "--data", str(data), "-o", str(part_file))
        other = tmp_path / "other.gcde"
        run_cli(*synth_args(other, classes=4, per_class=10, dim=8))
        code, _, err = run_cli("eval", "--partition", str(part_file), "--data", str(other))
        assert code == 2
        assert "instances" in err

    def test_eval_ground_truth_partition_is_perfect(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli(*synth_args(data, classes=4, per_class=15, dim=8))
        ds = load_embeddings(data)
        part_file = tmp_path / "gt.tsv"
        lines = [f"{i}\t{int(c)}" for i, c in enumerate(ds.eval_truth)]
        part_file.write_text("\n".join(lines) + f"\nk={len(set(ds.eval_truth.tolist()))}\n")
        code, stdout, _ = run_cli("eval", "--partition", str(part_file), "--data", str(data))
        assert code == 0
        assert "acc_all=1.0000" in stdout


class TestAssignEndToEnd:
    def test_two_blob_footer_k2(self, tmp_path):
        data = tmp_path / "blobs.gcde"
        run_cli("synth", "--classes", "2", "--per-class", "30", "--dim", "8",
                "--separation", "30", "--seed", "2", "-o", str(data))
        out = tmp_path / "run"
        run_cli("train", "--data", str(data), "-o", str(out),
                "--epochs", "10", "--batch-size", "60", "--hidden-dim", "16",
                "--out-dim", "4", "--k-proto", "4")
        part_file = tmp_path / "p.tsv"
        # with only two 30-node blobs the graph needs enough neighbors per
        # node for modularity to keep each blob whole
        code, _, _ = run_cli("assign", "--checkpoint", str(out / "checkpoint.gcdh"),
                             "--data", str(data), "--m", "20", "-o", str(part_file))
        assert code == 0
        assert part_file.read_text().splitlines()[-1] == "k=2"


class TestPipeline:
    def test_full_run(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli(*synth_args(data, classes=4, per_class=15, dim=8))
        out = tmp_path / "run"
        code, stdout, _ = run_cli("pipeline", "--data", str(data), "-o", str(out),
                                  *FAST_TRAIN, "--m", "5")
        assert code == 0
        for name in ("config.txt", "checkpoint.gcdh", "history.txt",
                     "partition.tsv", "report.txt"):
            assert (out / name).exists(), name
        assert "acc_all=" in stdout
        assert not list(out.glob("*.incomplete"))

    def test_small_m_at_least_as_accurate_as_large_m(self, tmp_path):
        data = tmp_path / "d.gcde"
        run_cli("synth", "--classes", "5", "--per-class", "40", "--dim", "16",
                "--separation", "20", "--seed", "1", "-o", str(data))
        accs = {}
        for m in (5, 30):
            out = tmp_path / f"run-m{m}"
            code, stdout, _ = run_cli("pipeline", "--data", str(data), "-o", str(out),
                                      "--m", str(m), "--epochs", "10",
                                      "--batch-size", "100", "--hidden-dim", "32",
                                      "--out-dim", "6", "--k-proto", "10")
            assert code == 0
            line = next(l for l in stdout.splitlines() if l.startswith("acc_all="))
            accs[m] = float(line.split("=")[1])
        assert accs[5] >= accs[30]


class TestArtifactSuffix:
    def test_interrupted_write_keeps_incomplete_suffix(self, tmp_path):
        target = tmp_path / "out.bin"
        with pytest.raises(KeyboardInterrupt):
            with artifact(target) as tmp:
                tmp.write_bytes(b"partial")
                raise KeyboardInterrupt
        assert not target.exists()
        assert (tmp_path / "out.bin.incomplete").read_bytes() == b"partial"

    def test_successful_write_renames(self, tmp_path):
        target = tmp_path / "out.bin"
        with artifact(target) as tmp:
            tmp.write_bytes(b"done")
        assert target.read_bytes() == b"done"
        assert not (tmp_path / "out.bin.incomplete").exists()


def test_subprocess_entry_point(tmp_path):
    out = tmp_path / "d.gcde"
    proc = subprocess.run(
        [sys.executable, "-m", "catdisc.cli", "synth", "--classes", "2",
         "--per-class", "3", "--dim", "4", "-o", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


def test_usage_error_is_exit_2():
    proc = subprocess.run(
        [sys.executable, "-m", "catdisc.cli", "synth"], capture_output=True
    )
    assert proc.returncode == 2
