import csv

import numpy as np
import pytest

from remixlab.cli import main
from remixlab.data import load_csv

TOML = """
name = "clitoy"
seed = 3
imbalance_ratios = [0.1]
minority_classes = [1]
methods = ["baseline", "remix"]

[dataset]
kind = "two_gaussians"
n_major = 80
separation = 3.0

[sampler]
batch_size = 16

[train]
epochs = 2
patience = 2
hidden_dims = [6]

[split]
folds = 2
repetitions = 1
"""


def run(*argv):
    return main([str(a) for a in argv])


def write_config(tmp_path, text=TOML):
    path = tmp_path / "exp.toml"
    path.write_text(text)
    return path


def read_lines(path):
    return path.read_text().splitlines()


class TestGen:
    def test_writes_csv_with_expected_rows(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run("gen", "--kind", "ring", "--n-major", 25, "--seed", 1,
                   "--out", out) == 0
        ds = load_csv(out, "label")
        assert ds.n_samples == 50 and ds.n_classes == 2

    def test_ir_flag_downsamples_minority(self, tmp_path):
        out = tmp_path / "d.csv"
        run("gen", "--kind", "two_gaussians", "--n-major", 100, "--ir", "0.1",
            "--seed", 1, "--out", out)
        ds = load_csv(out, "label")
        assert ds.class_counts().tolist() == [100, 10]

    def test_counts_flag_for_mixture(self, tmp_path):
        out = tmp_path / "d.csv"
        run("gen", "--kind", "gaussian_mixture", "--counts", "30,20,10",
            "--seed", 2, "--out", out)
        assert load_csv(out, "label").class_counts().tolist() == [30, 20, 10]

    def test_missing_required_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("gen", "--kind", "ring", "--n-major", 10)
        assert exc.value.code == 2


class TestTrainEval:
    @pytest.fixture()
    def data_csv(self, tmp_path):
        out = tmp_path / "train.csv"
        run("gen", "--kind", "two_gaussians", "--n-major", 120, "--separation",
            "3.0", "--ir", "0.2", "--seed", 4, "--out", out)
        return out

    def test_round_trip(self, tmp_path, data_csv, capsys):
        ckpt = tmp_path / "model.npz"
        assert run("train", "--data", data_csv, "--strategy", "remix",
                   "--epochs", 3, "--patience", 3, "--hidden-dims", "8",
                   "--batch-size", 16, "--seed", 5, "--out", ckpt) == 0
        out = capsys.readouterr().out
        assert out.startswith("resolved config:")
        assert ckpt.exists()

        report_csv = tmp_path / "metrics.csv"
        assert run("eval", "--data", data_csv, "--checkpoint", ckpt,
                   "--out", report_csv) == 0
        out = capsys.readouterr().out
        assert "g-mean" in out and "balanced Brier" in out
        rows = list(csv.reader(read_lines(report_csv)))
        assert len(rows) == 2 and rows[0][0] == "n_evaluated"

    def test_eval_remaps_reordered_class_names(self, tmp_path, capsys):
        rng = np.random.default_rng(6)
        x = np.vstack([rng.normal(0, 1, (40, 2)), rng.normal(4, 1, (12, 2))])
        names = ["neg"] * 40 + ["pos"] * 12
        train_csv = tmp_path / "t.csv"
        with open(train_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x0", "x1", "label"])
            for row, name in zip(x, names):
                w.writerow([repr(float(row[0])), repr(float(row[1])), name])
        # same rows, minority first, so the eval CSV sees "pos" before "neg"
        flipped_csv = tmp_path / "f.csv"
        with open(flipped_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x0", "x1", "label"])
            for row, name in list(zip(x, names))[::-1]:
                w.writerow([repr(float(row[0])), repr(float(row[1])), name])

        ckpt = tmp_path / "m.npz"
        run("train", "--data", train_csv, "--epochs", 2, "--patience", 2,
            "--hidden-dims", "6", "--batch-size", 8, "--seed", 7, "--out", ckpt)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert run("eval", "--data", train_csv, "--checkpoint", ckpt, "--out", a) == 0
        assert run("eval", "--data", flipped_csv, "--checkpoint", ckpt, "--out", b) == 0
        header, row_a = list(csv.reader(read_lines(a)))
        _, row_b = list(csv.reader(read_lines(b)))
        # counts and recalls are order-invariant integers/ratios; Brier sums
        # accumulate in row order so only ulp-level drift is allowed there
        for name, va, vb in zip(header, row_a, row_b):
            if name.startswith(("n_", "recall_", "gmean")):
                assert va == vb, name
            else:
                assert abs(float(va) - float(vb)) <= 1e-12, name

    def test_eval_rejects_unseen_label(self, tmp_path, data_csv, capsys):
        ckpt = tmp_path / "m.npz"
        run("train", "--data", data_csv, "--epochs", 2, "--hidden-dims", "6",
            "--seed", 8, "--out", ckpt)
        bad_csv = tmp_path / "bad.csv"
        bad_csv.write_text("x0,x1,label\n0.0,0.0,0\n1.0,1.0,9\n")
        assert run("eval", "--data", bad_csv, "--checkpoint", ckpt) == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ") and "9" in err
        assert err.count("\n") == 1

    def test_runtime_error_exits_1_single_line(self, tmp_path, capsys):
        assert run("eval", "--data", tmp_path / "nope.csv",
                   "--checkpoint", tmp_path / "nope.npz") == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert err.count("\n") == 1


class TestSurfaceKde:
    def test_surface_row_count_and_header(self, tmp_path):
        data = tmp_path / "d.csv"
        run("gen", "--kind", "two_gaussians", "--n-major", 40, "--seed", 9,
            "--out", data)
        ckpt = tmp_path / "m.npz"
        run("train", "--data", data, "--epochs", 2, "--hidden-dims", "6",
            "--seed", 10, "--out", ckpt)
        out = tmp_path / "s.csv"
        assert run("surface", "--data", data, "--checkpoint", ckpt,
                   "--resolution", 5, "--margin", "0.2", "--out", out) == 0
        lines = read_lines(out)
        assert lines[0] == "x1,x2,p_class_0,p_class_1"
        assert len(lines) == 1 + 25

    def test_kde_outputs_grid_sized_tables(self, tmp_path):
        data = tmp_path / "d.csv"
        run("gen", "--kind", "two_gaussians", "--n-major", 150, "--dim", 1,
            "--ir", "0.1", "--seed", 11, "--out", data)
        assert run("kde", "--data", data, "--strategy", "remix", "--alpha",
                   "0.3", "--n-batches", 40, "--seed", 12,
                   "--out-dir", tmp_path) == 0
        for name in ("features_kde.csv", "labels_kde.csv"):
            lines = read_lines(tmp_path / name)
            assert lines[0] == "value,density"
            assert len(lines) == 1 + 256

    def test_kde_rejects_2d_data(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        run("gen", "--kind", "ring", "--n-major", 30, "--seed", 13, "--out", data)
        assert run("kde", "--data", data, "--out-dir", tmp_path) == 1
        assert "1-D" in capsys.readouterr().err


class TestCompareSweep:
    def test_compare_writes_five_tables(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "res"
        assert run("compare", "--config", cfg, "--out-dir", out_dir) == 0
        stdout = capsys.readouterr().out
        assert stdout.startswith("resolved config:")
        for name in ("results.csv", "aggregates.csv", "gains.csv",
                     "ranks.csv", "rank_sums.csv"):
            assert (out_dir / name).exists()

    def test_compare_is_byte_identical_across_runs_and_jobs(self, tmp_path):
        cfg = write_config(tmp_path)
        dirs = [tmp_path / "r1", tmp_path / "r2", tmp_path / "r3"]
        run("compare", "--config", cfg, "--out-dir", dirs[0])
        run("compare", "--config", cfg, "--out-dir", dirs[1])
        run("compare", "--config", cfg, "--out-dir", dirs[2], "--jobs", 2)
        for name in ("results.csv", "aggregates.csv", "gains.csv",
                     "ranks.csv", "rank_sums.csv"):
            ref = (dirs[0] / name).read_bytes()
            assert (dirs[1] / name).read_bytes() == ref
            assert (dirs[2] / name).read_bytes() == ref

    def test_seed_override_changes_results(self, tmp_path):
        cfg = write_config(tmp_path)
        run("compare", "--config", cfg, "--out-dir", tmp_path / "s3")
        run("compare", "--config", cfg, "--seed", 99,
            "--out-dir", tmp_path / "s99")
        assert ((tmp_path / "s3" / "results.csv").read_bytes()
                != (tmp_path / "s99" / "results.csv").read_bytes())

    def test_sweep_row_count(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "sweep"
        assert run("sweep", "--config", cfg, "--alphas", "0.0,0.3",
                   "--out-dir", out_dir) == 0
        lines = read_lines(out_dir / "results.csv")
        # one row per alpha x ir x (fold x repetition), plus the header
        assert len(lines) == 1 + 2 * 1 * 2

    def test_sweep_requires_alphas_flag(self, tmp_path):
        cfg = write_config(tmp_path)
        with pytest.raises(SystemExit) as exc:
            run("sweep", "--config", cfg)
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 2

    def test_bad_config_key_reports_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, TOML + "\nbogus_key = 1\n")
        assert run("compare", "--config", cfg) == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ") and "bogus_key" in err
