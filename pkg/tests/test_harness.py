import numpy as np
import pytest

from remixlab.data import make_two_gaussians
from remixlab.harness import (
    DataSource,
    ExperimentConfig,
    apply_standardizer,
    build_dataset,
    export_mixed_distribution,
    export_surface,
    fit_standardizer,
    load_config,
    run_experiment,
    surface_csv_header,
    sweep_alpha,
)
from remixlab.network import TrainConfig, init_network
from remixlab.sampling import MiniBatchSampler, SamplerSpec

TINY_TRAIN = TrainConfig(epochs=3, patience=3, hidden_dims=(6,))


def johnk_beta(alpha, rng, n):
    """Independent rejection-sampling oracle for Beta(alpha, alpha) draws."""
    out = []
    need = n
    while need > 0:
        x = rng.random(2 * need + 16) ** (1.0 / alpha)
        y = rng.random(2 * need + 16) ** (1.0 / alpha)
        s = x + y
        keep = (s > 0.0) & (s <= 1.0)
        out.append((x[keep] / s[keep])[:need])
        need = n - sum(len(c) for c in out)
    return np.concatenate(out)


def tiny_config(**overrides):
    base = dict(
        name="toy",
        source=DataSource("two_gaussians", {"n_major": 120, "separation": 3.0}),
        minority_classes=(1,),
        imbalance_ratios=(0.1,),
        methods=("baseline", "remix"),
        batch_size=16,
        train=TINY_TRAIN,
        folds=2,
        repetitions=1,
        seed=0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_requires_nonempty_lists(self):
        with pytest.raises(ValueError, match="imbalance_ratios"):
            tiny_config(imbalance_ratios=())
        with pytest.raises(ValueError, match="methods"):
            tiny_config(methods=())
        with pytest.raises(ValueError, match="minority_classes"):
            tiny_config(minority_classes=())

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method"):
            tiny_config(methods=("baseline", "oversample"))

    def test_rejects_duplicate_methods(self):
        with pytest.raises(ValueError, match="duplicate"):
            tiny_config(methods=("remix", "remix"))

    def test_rejects_bad_override_keys(self):
        with pytest.raises(ValueError, match="override"):
            tiny_config(method_overrides={"remix": {"epochs": 5}})

    def test_sampler_params_apply_overrides(self):
        cfg = tiny_config(method_overrides={"remix": {"alpha": 0.7}})
        assert cfg.sampler_params("remix") == (16, 0.7, 5)
        assert cfg.sampler_params("mixup") == (16, 0.1, 5)


class TestBuildDataset:
    def test_each_kind(self):
        ring = build_dataset(DataSource("ring", {"n_major": 30}), seed=0)
        assert ring.class_counts().tolist() == [30, 30]
        two = build_dataset(
            DataSource("two_gaussians", {"n_major": 20, "n_minor": 10, "dim": 3}),
            seed=0,
        )
        assert two.n_features == 3
        mix_ds = build_dataset(
            DataSource("gaussian_mixture", {"counts": [15, 15, 15]}), seed=0
        )
        assert mix_ds.n_classes == 3

    def test_csv_kind(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x0,x1,label\n1,2,a\n3,4,b\n")
        ds = build_dataset(DataSource("csv", {"path": str(path)}), seed=0)
        assert ds.n_samples == 2

    def test_unknown_kind_and_params(self):
        with pytest.raises(ValueError, match="kind"):
            DataSource("blobs", {})
        with pytest.raises(ValueError, match="unknown parameter"):
            build_dataset(DataSource("ring", {"n_major": 10, "radius": 2}), seed=0)
        with pytest.raises(ValueError, match="requires parameter"):
            build_dataset(DataSource("ring", {}), seed=0)


class TestRunExperiment:
    def test_row_cardinality_two_ir_five_methods_twenty_splits(self):
        cfg = tiny_config(
            imbalance_ratios=(0.1, 0.05),
            methods=("baseline", "cost", "smote", "mixup", "remix"),
            repetitions=10,
            train=TrainConfig(epochs=1, patience=1, hidden_dims=(4,)),
        )
        table = run_experiment(cfg)
        assert len(table.rows) == 2 * 5 * 20

    def test_baseline_only_gains_are_zero(self):
        cfg = tiny_config(methods=("baseline",))
        table = run_experiment(cfg)
        for g in table.gains():
            assert g["mean_gm_gain"] == 0.0
            assert g["mean_bbs_gain"] == 0.0

    def test_aggregates_recompute_from_rows(self):
        table = run_experiment(tiny_config(repetitions=2))
        for agg in table.aggregates():
            members = [
                r.report for r in table.ok_rows()
                if (r.dataset, r.ir, r.method, r.alpha)
                == (agg["dataset"], agg["ir"], agg["method"], agg["alpha"])
            ]
            assert len(members) == agg["n_splits"]
            assert abs(np.mean([m.gmean for m in members]) - agg["mean_gmean"]) <= 1e-12
            assert abs(np.mean([m.bbs for m in members]) - agg["mean_bbs"]) <= 1e-12

    def test_deterministic_rows(self):
        cfg = tiny_config()
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        for ra, rb in zip(a.rows, b.rows):
            assert ra.seed == rb.seed
            assert ra.report.gmean == rb.report.gmean
            assert ra.report.bbs == rb.report.bbs

    def test_parallel_matches_serial(self):
        cfg = tiny_config()
        serial = run_experiment(cfg, jobs=1)
        parallel = run_experiment(cfg, jobs=2)
        for rs, rp in zip(serial.rows, parallel.rows):
            assert rs.key() == rp.key()
            assert rs.report.gmean == rp.report.gmean

    def test_adding_a_method_never_perturbs_others(self):
        small = run_experiment(tiny_config(methods=("baseline", "remix")))
        larger = run_experiment(
            tiny_config(methods=("baseline", "cost", "smote", "mixup", "remix"))
        )
        wanted = {r.key(): r for r in larger.rows if r.method in ("baseline", "remix")}
        assert len(wanted) == len(small.rows)
        for row in small.rows:
            twin = wanted[row.key()]
            assert twin.seed == row.seed
            assert twin.report.gmean == row.report.gmean
            assert twin.report.bbs == row.report.bbs

    def test_failed_cells_recorded_and_run_continues(self, tmp_path):
        cfg = tiny_config(methods=("baseline", "remix"), batch_size=1)
        table = run_experiment(cfg)
        remix_rows = [r for r in table.rows if r.method == "remix"]
        assert remix_rows and all(r.report is None for r in remix_rows)
        assert all("batch_size" in r.error for r in remix_rows)
        baseline_rows = [r for r in table.rows if r.method == "baseline"]
        assert baseline_rows and all(r.report is not None for r in baseline_rows)
        # failed cells vanish from aggregates but the CSVs still write
        assert {a["method"] for a in table.aggregates()} == {"baseline"}
        paths = table.write_csv(tmp_path)
        assert len(paths) == 5

    def test_invalid_minority_class_fails_fast(self):
        with pytest.raises(ValueError, match="minority class"):
            run_experiment(tiny_config(minority_classes=(5,)))

    def test_rank_tables(self):
        cfg = tiny_config(methods=("baseline", "cost", "remix"), repetitions=2)
        table = run_experiment(cfg)
        ranks = table.cell_ranks("bbs")
        assert len(ranks) == 3
        assert sorted(r["rank"] for r in ranks) == [1.0, 2.0, 3.0]
        sums = table.sum_of_ranks("gmean")
        assert len(sums) == 3
        with pytest.raises(ValueError, match="metric"):
            table.cell_ranks("accuracy")


class TestSweepAlpha:
    def test_requires_remix(self):
        with pytest.raises(ValueError, match="remix"):
            sweep_alpha(tiny_config(methods=("baseline",)), [0.1])

    def test_single_point_matches_run_experiment(self):
        cfg = tiny_config()
        remix_rows = [r for r in run_experiment(cfg).rows if r.method == "remix"]
        swept = sweep_alpha(cfg, [0.1]).rows
        assert len(swept) == len(remix_rows)
        for a, b in zip(remix_rows, swept):
            assert a.key() == b.key()
            assert a.seed == b.seed
            assert a.report.gmean == b.report.gmean
            assert a.report.bbs == b.report.bbs

    def test_alpha_zero_equals_plain_balanced_resampling(self):
        cfg = tiny_config()
        swept = sweep_alpha(cfg, [0.0]).rows
        plain = run_experiment(
            tiny_config(method_overrides={"remix": {"alpha": 0.0}})
        )
        plain_rows = [r for r in plain.rows if r.method == "remix"]
        for a, b in zip(plain_rows, swept):
            assert a.seed == b.seed
            assert a.report.gmean == b.report.gmean

    def test_row_count_and_alpha_column(self):
        cfg = tiny_config(repetitions=2)
        table = sweep_alpha(cfg, [0.05, 0.4])
        assert len(table.rows) == 2 * 4  # alphas x (folds x reps)
        assert sorted({r.alpha for r in table.rows}) == [0.05, 0.4]

    def test_rejects_bad_alphas(self):
        with pytest.raises(ValueError, match="nonempty"):
            sweep_alpha(tiny_config(), [])
        with pytest.raises(ValueError, match="nonnegative"):
            sweep_alpha(tiny_config(), [-0.1])


class TestExportSurface:
    def _net(self, n_classes=2):
        return init_network((2, 4, n_classes), seed=0)

    def test_grid_cardinality_and_stochastic_rows(self):
        ds = make_two_gaussians(20, 20, seed=0)
        grid = export_surface(self._net(), ds, resolution=3, margin=0.1)
        assert grid.shape == (9, 4)
        assert np.allclose(grid[:, 2:].sum(axis=1), 1.0, atol=1e-9)
        assert surface_csv_header(2) == ["x1", "x2", "p_class_0", "p_class_1"]

    def test_zero_margin_corners_touch_bounding_box(self):
        ds = make_two_gaussians(30, 30, seed=1)
        grid = export_surface(self._net(), ds, resolution=4, margin=0.0)
        lo = ds.features.min(axis=0)
        hi = ds.features.max(axis=0)
        assert np.isclose(grid[0, 0], lo[0]) and np.isclose(grid[0, 1], lo[1])
        assert np.isclose(grid[-1, 0], hi[0]) and np.isclose(grid[-1, 1], hi[1])

    def test_standardizer_is_applied_to_model_inputs(self):
        ds = make_two_gaussians(30, 30, seed=2)
        net = self._net()
        mean, scale = fit_standardizer(ds.features)
        raw = export_surface(net, ds, 3, 0.0)
        adjusted = export_surface(net, ds, 3, 0.0, feature_mean=mean,
                                  feature_scale=scale)
        assert np.array_equal(raw[:, :2], adjusted[:, :2])
        assert not np.allclose(raw[:, 2:], adjusted[:, 2:])

    def test_requires_two_dimensional_data(self):
        ds = make_two_gaussians(10, 10, dim=3, seed=0)
        with pytest.raises(ValueError, match="2-D"):
            export_surface(self._net(), ds, 3, 0.1)

    def test_argument_validation(self):
        ds = make_two_gaussians(10, 10, seed=0)
        with pytest.raises(ValueError, match="resolution"):
            export_surface(self._net(), ds, 1, 0.1)
        with pytest.raises(ValueError, match="margin"):
            export_surface(self._net(), ds, 3, -0.5)


class TestExportMixedDistribution:
    def _dataset(self):
        ds = make_two_gaussians(400, 400, separation=4.0, noise=1.0, dim=1, seed=3)
        from remixlab.data import imbalance

        return imbalance(ds, [1], 0.1, seed=3)

    def test_requires_one_dimensional_data(self):
        ds = make_two_gaussians(10, 10, dim=2, seed=0)
        with pytest.raises(ValueError, match="1-D"):
            export_mixed_distribution(ds, SamplerSpec("remix", 8, seed=0), 5)

    def test_densities_integrate_to_one(self):
        ds = self._dataset()
        for alpha in (0.0, 0.1, 0.5):
            spec = SamplerSpec("remix", 64, alpha=alpha, seed=4)
            feat, lab = export_mixed_distribution(ds, spec, 50)
            assert abs(np.trapezoid(feat.density, feat.grid) - 1.0) <= 1e-3
            assert abs(np.trapezoid(lab.density, lab.grid) - 1.0) <= 1e-3
            assert len(feat.grid) == 256 and len(lab.grid) == 256

    def test_alpha_zero_labels_are_pure(self):
        ds = self._dataset()
        spec = SamplerSpec("remix", 64, alpha=0.0, seed=5)
        sampler = MiniBatchSampler(ds, spec)
        values = np.concatenate(
            [sampler.next_batch().soft_labels[:, 1] for _ in range(100)]
        )
        assert np.mean(np.isin(values, [0.0, 1.0])) >= 0.99

    def test_more_mixing_moves_label_mass_inward(self):
        ds = self._dataset()
        masses = {}
        oracle = {}
        rng = np.random.default_rng(60)
        for alpha in (0.1, 0.5):
            spec = SamplerSpec("remix", 64, alpha=alpha, seed=6)
            _, lab = export_mixed_distribution(ds, spec, 100)
            inside = (lab.grid >= 0.25) & (lab.grid <= 0.75)
            masses[alpha] = np.trapezoid(lab.density[inside], lab.grid[inside])
            lams = johnk_beta(alpha, rng, 20_000)
            oracle[alpha] = np.mean((lams >= 0.25) & (lams <= 0.75))
        # independent check that the mixing weight itself explains the shift
        assert oracle[0.5] > oracle[0.1]
        assert masses[0.5] > masses[0.1]

    def test_silverman_bandwidth_from_one_epoch(self):
        ds = self._dataset()
        spec = SamplerSpec("baseline", 64, seed=7)
        n_batches = MiniBatchSampler(ds, spec).batches_per_epoch
        feat, _ = export_mixed_distribution(ds, spec, n_batches)
        values = ds.features[:, 0]
        sd = values.std(ddof=1)
        iqr = np.subtract(*np.percentile(values, [75.0, 25.0]))
        expected = 0.9 * min(sd, iqr / 1.34) * len(values) ** (-0.2)
        assert np.isclose(feat.bandwidth, expected, rtol=1e-12)
        assert feat.n_samples == ds.n_samples

    def test_explicit_bandwidth_respected(self):
        ds = self._dataset()
        spec = SamplerSpec("remix", 64, alpha=0.2, seed=8)
        feat, lab = export_mixed_distribution(ds, spec, 20, bandwidth=0.25)
        assert feat.bandwidth == 0.25 and lab.bandwidth == 0.25

    def test_bad_arguments(self):
        ds = self._dataset()
        spec = SamplerSpec("remix", 64, seed=9)
        with pytest.raises(ValueError, match="n_batches"):
            export_mixed_distribution(ds, spec, 0)
        with pytest.raises(ValueError, match="bandwidth"):
            export_mixed_distribution(ds, spec, 5, bandwidth=-1.0)


class TestStandardizer:
    def test_fit_and_apply(self):
        rng = np.random.default_rng(10)
        x = rng.normal(3.0, 2.0, size=(200, 4))
        mean, scale = fit_standardizer(x)
        z = apply_standardizer(x, mean, scale)
        assert np.allclose(z.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(z.std(axis=0), 1.0, atol=1e-12)

    def test_constant_column_scale_is_one(self):
        x = np.column_stack([np.ones(10), np.arange(10.0)])
        mean, scale = fit_standardizer(x)
        assert scale[0] == 1.0
        z = apply_standardizer(x, mean, scale)
        assert np.all(z[:, 0] == 0.0)


CONFIG_TOML = """
name = "demo"
seed = 42
standardize = false
out_dir = "artifacts"
jobs = 2
imbalance_ratios = [0.05, 0.01]
minority_classes = [1]
methods = ["baseline", "remix"]

[dataset]
kind = "ring"
n_major = 500
noise = 0.2

[sampler]
batch_size = 32
alpha = 0.3
k_neighbors = 7

[sampler.overrides.remix]
alpha = 0.05

[train]
epochs = 50
patience = 5
learning_rate = 0.002
hidden_dims = [32, 16]
dropout_rate = 0.2

[split]
folds = 2
repetitions = 3
validation_fraction = 0.25
"""


class TestLoadConfig:
    def test_full_round_trip(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(CONFIG_TOML)
        cfg = load_config(path)
        assert cfg.name == "demo"
        assert cfg.seed == 42
        assert cfg.standardize is False
        assert cfg.out_dir == "artifacts"
        assert cfg.jobs == 2
        assert cfg.imbalance_ratios == (0.05, 0.01)
        assert cfg.methods == ("baseline", "remix")
        assert cfg.source.kind == "ring"
        assert cfg.source.params == {"n_major": 500, "noise": 0.2}
        assert cfg.batch_size == 32 and cfg.alpha == 0.3 and cfg.k_neighbors == 7
        assert cfg.method_overrides == {"remix": {"alpha": 0.05}}
        assert cfg.train.epochs == 50
        assert cfg.train.hidden_dims == (32, 16)
        assert cfg.train.dropout_rate == 0.2
        assert cfg.folds == 2 and cfg.repetitions == 3
        assert cfg.validation_fraction == 0.25

    def test_defaults_fill_missing_tables(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(
            'name = "d"\nimbalance_ratios = [0.1]\nminority_classes = [1]\n'
            'methods = ["baseline"]\n\n[dataset]\nkind = "ring"\nn_major = 10\n'
        )
        cfg = load_config(path)
        assert cfg.batch_size == 64 and cfg.alpha == 0.1
        assert cfg.train.epochs == 200 and cfg.folds == 2
        assert cfg.standardize is True

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(CONFIG_TOML + "\nextra_knob = 1\n")
        with pytest.raises(ValueError, match="extra_knob"):
            load_config(path)
        path.write_text(CONFIG_TOML.replace("patience = 5", "patienc = 5"))
        with pytest.raises(ValueError, match="patienc"):
            load_config(path)

    def test_missing_required_key(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('name = "d"\n[dataset]\nkind = "ring"\n')
        with pytest.raises(ValueError, match="imbalance_ratios"):
            load_config(path)

    def test_missing_dataset_kind(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(
            'name = "d"\nimbalance_ratios = [0.1]\nminority_classes = [1]\n'
            'methods = ["baseline"]\n\n[dataset]\nn_major = 10\n'
        )
        with pytest.raises(ValueError, match="kind"):
            load_config(path)
