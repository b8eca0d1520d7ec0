"""Experiment orchestration: imbalance sweeps, method comparisons under
repeated stratified CV, alpha sweeps, and CSV exporters for decision surfaces
and mixed-sample density estimates."""

from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import metrics, network
from .data import (
    Dataset,
    SplitPlan,
    imbalance,
    load_csv,
    make_gaussian_mixture,
    make_ring,
    make_two_gaussians,
    split,
)
from .metrics import MetricsReport
from .network import TrainConfig
from .sampling import STRATEGIES, MiniBatchSampler, SamplerSpec
from .seeding import derive_seed

__all__ = [
    "DataSource",
    "ExperimentConfig",
    "ResultRow",
    "ResultTable",
    "KdeTable",
    "build_dataset",
    "fit_standardizer",
    "apply_standardizer",
    "run_experiment",
    "sweep_alpha",
    "export_surface",
    "export_mixed_distribution",
    "surface_csv_header",
    "load_config",
]

KDE_GRID_POINTS = 256

# Strategies whose sampling actually consumes the mixing parameter; only
# these fold alpha into per-cell seeds and result keys.
MIXING_STRATEGIES = ("mixup", "remix")


@dataclass(frozen=True)
class DataSource:
    """Where a base dataset comes from: a named generator or a CSV file.

    kinds and their params:
      ring             n_major (required), n_minor (default n_major), noise (0.15)
      two_gaussians    n_major (required), n_minor (default n_major),
                       separation (2.0), noise (1.0), dim (2)
      gaussian_mixture counts (required list), spread (2.0), noise (0.6)
      csv              path (required), label_column ("label"), has_header (true)
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in ("ring", "two_gaussians", "gaussian_mixture", "csv"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        object.__setattr__(self, "params", dict(self.params))


def _take_params(source: DataSource, required, optional) -> dict:
    params = dict(source.params)
    out = {}
    for key in required:
        if key not in params:
            raise ValueError(f"dataset kind {source.kind!r} requires parameter {key!r}")
        out[key] = params.pop(key)
    for key, default in optional.items():
        out[key] = params.pop(key, default)
    if params:
        raise ValueError(
            f"unknown parameter(s) for dataset kind {source.kind!r}: {sorted(params)}"
        )
    return out


def build_dataset(source: DataSource, seed: int) -> Dataset:
    """Materialize a DataSource; `seed` drives the generators, CSV ignores it."""
    if source.kind == "ring":
        p = _take_params(source, ["n_major"], {"n_minor": None, "noise": 0.15})
        n_minor = p["n_major"] if p["n_minor"] is None else p["n_minor"]
        return make_ring(int(p["n_major"]), int(n_minor), float(p["noise"]), seed)
    if source.kind == "two_gaussians":
        p = _take_params(
            source,
            ["n_major"],
            {"n_minor": None, "separation": 2.0, "noise": 1.0, "dim": 2},
        )
        n_minor = p["n_major"] if p["n_minor"] is None else p["n_minor"]
        return make_two_gaussians(
            int(p["n_major"]), int(n_minor), float(p["separation"]),
            float(p["noise"]), int(p["dim"]), seed,
        )
    if source.kind == "gaussian_mixture":
        p = _take_params(source, ["counts"], {"spread": 2.0, "noise": 0.6})
        return make_gaussian_mixture(p["counts"], float(p["spread"]), float(p["noise"]), seed)
    p = _take_params(source, ["path"], {"label_column": "label", "has_header": True})
    return load_csv(p["path"], p["label_column"], bool(p["has_header"]))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full recipe for a comparison run; every field has a config-file key."""

    name: str
    source: DataSource
    minority_classes: tuple[int, ...]
    imbalance_ratios: tuple[float, ...]
    methods: tuple[str, ...]
    batch_size: int = 64
    alpha: float = 0.1
    k_neighbors: int = 5
    method_overrides: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    folds: int = 2
    repetitions: int = 10
    validation_fraction: float = 0.3
    standardize: bool = True
    out_dir: str = "results"
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "minority_classes",
                           tuple(int(c) for c in self.minority_classes))
        object.__setattr__(self, "imbalance_ratios",
                           tuple(float(r) for r in self.imbalance_ratios))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.name:
            raise ValueError("name must be nonempty")
        if not self.imbalance_ratios:
            raise ValueError("imbalance_ratios must be nonempty")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in STRATEGIES]
        if unknown:
            raise ValueError(f"unknown method(s) {unknown}; choose from {STRATEGIES}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError(f"duplicate methods in {self.methods}")
        if not self.minority_classes:
            raise ValueError("minority_classes must be nonempty")
        bad = [m for m in self.method_overrides if m not in STRATEGIES]
        if bad:
            raise ValueError(f"method_overrides for unknown method(s) {bad}")
        for m, over in self.method_overrides.items():
            extra = set(over) - {"alpha", "batch_size", "k_neighbors"}
            if extra:
                raise ValueError(f"unknown override key(s) for {m!r}: {sorted(extra)}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")

    def sampler_params(self, method: str) -> tuple[int, float, int]:
        """(batch_size, alpha, k_neighbors) for a method, overrides applied."""
        over = self.method_overrides.get(method, {})
        return (
            int(over.get("batch_size", self.batch_size)),
            float(over.get("alpha", self.alpha)),
            int(over.get("k_neighbors", self.k_neighbors)),
        )


@dataclass(frozen=True)
class ResultRow:
    """One (split x method) outcome; `report` is None when the cell failed."""

    dataset: str
    ir: float
    method: str
    alpha: float | None
    repetition: int
    fold: int
    seed: int
    report: MetricsReport | None
    error: str | None = None

    def key(self):
        alpha_key = -1.0 if self.alpha is None else self.alpha
        return (self.dataset, self.ir, self.method, alpha_key,
                self.repetition, self.fold)


def _competitor(row: ResultRow) -> tuple[str, float | None]:
    return (row.method, row.alpha)


class ResultTable:
    """Keyed result rows plus aggregate views (means, gains, ranks)."""

    def __init__(self, rows):
        self.rows = sorted(rows, key=ResultRow.key)

    def ok_rows(self) -> list[ResultRow]:
        return [r for r in self.rows if r.report is not None]

    def failed_rows(self) -> list[ResultRow]:
        return [r for r in self.rows if r.report is None]

    def aggregates(self) -> list[dict]:
        """Mean/std of gmean and bbs per (dataset, ir, method, alpha) cell.

        Standard deviations are population (ddof=0). Cells whose every split
        failed are omitted.
        """
        groups: dict[tuple, list[ResultRow]] = {}
        for row in self.ok_rows():
            groups.setdefault(
                (row.dataset, row.ir, row.method, row.alpha), []
            ).append(row)
        out = []
        for (dataset, ir, method, alpha), members in sorted(
            groups.items(), key=lambda kv: _sort_key(kv[0])
        ):
            gms = np.array([r.report.gmean for r in members])
            bbs = np.array([r.report.bbs for r in members])
            out.append({
                "dataset": dataset, "ir": ir, "method": method, "alpha": alpha,
                "n_splits": len(members),
                "mean_gmean": float(gms.mean()), "std_gmean": float(gms.std()),
                "mean_bbs": float(bbs.mean()), "std_bbs": float(bbs.std()),
            })
        return out

    def gains(self) -> list[dict]:
        """Per-cell mean/std of split-wise (gm_gain, bbs_gain) vs baseline."""
        base: dict[tuple, MetricsReport] = {}
        for row in self.ok_rows():
            if row.method == "baseline":
                base[(row.dataset, row.ir, row.repetition, row.fold)] = row.report
        if not base:
            raise ValueError("gains require baseline rows in the table")
        groups: dict[tuple, list[tuple[float, float]]] = {}
        for row in self.ok_rows():
            ref = base.get((row.dataset, row.ir, row.repetition, row.fold))
            if ref is None:
                continue
            groups.setdefault(
                (row.dataset, row.ir, row.method, row.alpha), []
            ).append(metrics.gain(row.report, ref))
        out = []
        for (dataset, ir, method, alpha), pairs in sorted(
            groups.items(), key=lambda kv: _sort_key(kv[0])
        ):
            gm = np.array([p[0] for p in pairs])
            bb = np.array([p[1] for p in pairs])
            out.append({
                "dataset": dataset, "ir": ir, "method": method, "alpha": alpha,
                "n_splits": len(pairs),
                "mean_gm_gain": float(gm.mean()), "std_gm_gain": float(gm.std()),
                "mean_bbs_gain": float(bb.mean()), "std_bbs_gain": float(bb.std()),
            })
        return out

    def cell_ranks(self, metric: str) -> list[dict]:
        """Rank competitors within each (dataset, ir) cell on the cell mean.

        metric is "gmean" (higher better) or "bbs" (lower better); rank 1 is
        best, ties share the average rank.
        """
        if metric not in ("gmean", "bbs"):
            raise ValueError(f"metric must be 'gmean' or 'bbs', got {metric!r}")
        cells: dict[tuple, dict[tuple, float]] = {}
        for agg in self.aggregates():
            cells.setdefault((agg["dataset"], agg["ir"]), {})[
                (agg["method"], agg["alpha"])
            ] = agg[f"mean_{metric}"]
        out = []
        for (dataset, ir), scores in sorted(cells.items()):
            competitors = sorted(scores, key=lambda c: (c[0], _alpha_key(c[1])))
            if len(competitors) < 2:
                continue
            ranks = metrics.rank_methods(
                [scores[c] for c in competitors], higher_is_better=(metric == "gmean")
            )
            for comp, rank in zip(competitors, ranks):
                out.append({
                    "metric": metric, "dataset": dataset, "ir": ir,
                    "method": comp[0], "alpha": comp[1], "rank": rank,
                })
        return out

    def sum_of_ranks(self, metric: str) -> dict[tuple, float]:
        """Total rank per competitor over all (dataset, ir) cells; lower wins."""
        sums: dict[tuple, float] = {}
        for entry in self.cell_ranks(metric):
            key = (entry["method"], entry["alpha"])
            sums[key] = sums.get(key, 0.0) + entry["rank"]
        return sums

    def merged(self, other: "ResultTable") -> "ResultTable":
        return ResultTable(self.rows + other.rows)

    def write_csv(self, out_dir) -> list[str]:
        """Write results/aggregates/gains/ranks/rank_sums CSVs; returns paths.

        Output bytes depend only on the row set (rows are key-sorted), so
        reruns and different worker counts produce identical files.
        """
        import os

        os.makedirs(out_dir, exist_ok=True)
        paths = []
        n_classes = max(
            (r.report.n_classes for r in self.ok_rows()), default=0
        )

        path = os.path.join(out_dir, "results.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["dataset", "ir", "method", "alpha", "repetition", "fold",
                 "seed", "status"]
                + metrics.report_csv_header(n_classes) + ["error"]
            )
            blank = [""] * len(metrics.report_csv_header(n_classes))
            for row in self.rows:
                head = [row.dataset, repr(row.ir), row.method, _alpha_str(row.alpha),
                        str(row.repetition), str(row.fold), str(row.seed)]
                if row.report is None:
                    writer.writerow(head + ["error"] + blank + [row.error or ""])
                else:
                    writer.writerow(
                        head + ["ok"] + metrics.report_csv_row(row.report) + [""]
                    )
        paths.append(path)

        path = os.path.join(out_dir, "aggregates.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["dataset", "ir", "method", "alpha", "n_splits",
                             "mean_gmean", "std_gmean", "mean_bbs", "std_bbs"])
            for a in self.aggregates():
                writer.writerow([a["dataset"], repr(a["ir"]), a["method"],
                                 _alpha_str(a["alpha"]), str(a["n_splits"]),
                                 repr(a["mean_gmean"]), repr(a["std_gmean"]),
                                 repr(a["mean_bbs"]), repr(a["std_bbs"])])
        paths.append(path)

        has_baseline = any(r.method == "baseline" for r in self.ok_rows())
        if has_baseline:
            path = os.path.join(out_dir, "gains.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["dataset", "ir", "method", "alpha", "n_splits",
                                 "mean_gm_gain", "std_gm_gain",
                                 "mean_bbs_gain", "std_bbs_gain"])
                for g in self.gains():
                    writer.writerow([g["dataset"], repr(g["ir"]), g["method"],
                                     _alpha_str(g["alpha"]), str(g["n_splits"]),
                                     repr(g["mean_gm_gain"]), repr(g["std_gm_gain"]),
                                     repr(g["mean_bbs_gain"]), repr(g["std_bbs_gain"])])
            paths.append(path)

        path = os.path.join(out_dir, "ranks.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "dataset", "ir", "method", "alpha", "rank"])
            for m in ("gmean", "bbs"):
                for entry in self.cell_ranks(m):
                    writer.writerow([entry["metric"], entry["dataset"],
                                     repr(entry["ir"]), entry["method"],
                                     _alpha_str(entry["alpha"]), repr(entry["rank"])])
        paths.append(path)

        path = os.path.join(out_dir, "rank_sums.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "method", "alpha", "sum_of_ranks"])
            for m in ("gmean", "bbs"):
                sums = self.sum_of_ranks(m)
                for (method, alpha) in sorted(
                    sums, key=lambda c: (c[0], _alpha_key(c[1]))
                ):
                    writer.writerow([m, method, _alpha_str(alpha),
                                     repr(sums[(method, alpha)])])
        paths.append(path)
        return paths


def _alpha_key(alpha) -> float:
    return -1.0 if alpha is None else float(alpha)


def _alpha_str(alpha) -> str:
    return "" if alpha is None else repr(float(alpha))


def _sort_key(group_key):
    dataset, ir, method, alpha = group_key
    return (dataset, ir, method, _alpha_key(alpha))


def fit_standardizer(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and scale (std, constant columns get scale 1)."""
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    return mean, scale


def apply_standardizer(features: np.ndarray, mean, scale) -> np.ndarray:
    return (np.asarray(features, np.float64) - mean) / scale


@dataclass(frozen=True)
class _CellTask:
    dataset: str
    ir: float
    method: str
    alpha: float | None
    repetition: int
    fold: int
    seed: int
    ds_train: Dataset
    ds_val: Dataset
    ds_test: Dataset
    sampler: SamplerSpec
    train_cfg: TrainConfig
    standardize: bool


def _one_line(text: str) -> str:
    return " ; ".join(part.strip() for part in text.splitlines() if part.strip())


def _run_cell(task: _CellTask) -> ResultRow:
    base = dict(
        dataset=task.dataset, ir=task.ir, method=task.method, alpha=task.alpha,
        repetition=task.repetition, fold=task.fold, seed=task.seed,
    )
    try:
        tr, va, te = task.ds_train, task.ds_val, task.ds_test
        if task.standardize:
            mean, scale = fit_standardizer(tr.features)
            tr = Dataset(apply_standardizer(tr.features, mean, scale),
                         tr.labels, tr.class_names)
            va = Dataset(apply_standardizer(va.features, mean, scale),
                         va.labels, va.class_names)
            te = Dataset(apply_standardizer(te.features, mean, scale),
                         te.labels, te.class_names)
        net, _ = network.train(tr, va, task.sampler, task.train_cfg)
        report = metrics.evaluate(network.forward(net, te.features), te.labels)
        return ResultRow(**base, report=report)
    except Exception as exc:  # record-and-continue: sweeps must not lose work
        message = _one_line(str(exc)) or type(exc).__name__
        return ResultRow(**base, report=None, error=f"{type(exc).__name__}: {message}")


def _cell_seed(cfg_seed: int, name: str, ir: float, method: str,
               alpha: float | None, repetition: int, fold: int) -> int:
    alpha_part = repr(float(alpha)) if alpha is not None else ""
    return derive_seed(cfg_seed, "cell", name, repr(float(ir)), method,
                       alpha_part, repetition, fold)


def _plan_tasks(cfg: ExperimentConfig, competitors) -> list[_CellTask]:
    """Lay out one task per (ir, split, competitor).

    competitors is a list of (method, alpha_override_or_None). Splits depend
    only on (seed, dataset, ir), and cell seeds fold in method and alpha, so
    adding a competitor never changes any other competitor's results.
    """
    base = build_dataset(cfg.source, derive_seed(cfg.seed, "dataset", cfg.name))
    bad = [c for c in cfg.minority_classes if not 0 <= c < base.n_classes]
    if bad:
        raise ValueError(
            f"minority class(es) {bad} outside 0..{base.n_classes - 1}"
        )
    tasks = []
    for ir in cfg.imbalance_ratios:
        ds_ir = imbalance(
            base, cfg.minority_classes, ir,
            derive_seed(cfg.seed, "imbalance", cfg.name, repr(float(ir))),
        )
        plan = SplitPlan(
            cfg.folds, cfg.repetitions, cfg.validation_fraction,
            derive_seed(cfg.seed, "split", cfg.name, repr(float(ir))),
        )
        for i, (ds_tr, ds_va, ds_te) in enumerate(split(ds_ir, plan)):
            rep, fold = divmod(i, cfg.folds)
            for method, alpha_override in competitors:
                batch_size, alpha, k_neighbors = cfg.sampler_params(method)
                if alpha_override is not None:
                    alpha = alpha_override
                row_alpha = alpha if method in MIXING_STRATEGIES else None
                seed = _cell_seed(cfg.seed, cfg.name, ir, method, row_alpha,
                                  rep, fold)
                tasks.append(_CellTask(
                    dataset=cfg.name, ir=ir, method=method, alpha=row_alpha,
                    repetition=rep, fold=fold, seed=seed,
                    ds_train=ds_tr, ds_val=ds_va, ds_test=ds_te,
                    sampler=SamplerSpec(method, batch_size, alpha, k_neighbors,
                                        seed=derive_seed(seed, "sampler")),
                    train_cfg=dataclasses.replace(
                        cfg.train, seed=derive_seed(seed, "train")
                    ),
                    standardize=cfg.standardize,
                ))
    return tasks


def _run_tasks(tasks, jobs: int) -> list[ResultRow]:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, tasks))
    return [_run_cell(t) for t in tasks]


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None) -> ResultTable:
    """Train and evaluate every configured method on every (ir, split) cell."""
    competitors = [(m, None) for m in cfg.methods]
    tasks = _plan_tasks(cfg, competitors)
    return ResultTable(_run_tasks(tasks, cfg.jobs if jobs is None else jobs))


def sweep_alpha(cfg: ExperimentConfig, alphas, jobs: int | None = None) -> ResultTable:
    """Full CV of the balanced-mixing strategy at each alpha in `alphas`."""
    if "remix" not in cfg.methods:
        raise ValueError("sweep requires 'remix' among the configured methods")
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("alphas must be nonempty")
    if any(a < 0 for a in alphas):
        raise ValueError(f"alphas must be nonnegative, got {alphas}")
    competitors = [("remix", a) for a in alphas]
    tasks = _plan_tasks(cfg, competitors)
    return ResultTable(_run_tasks(tasks, cfg.jobs if jobs is None else jobs))


def surface_csv_header(n_classes: int) -> list[str]:
    return ["x1", "x2"] + [f"p_class_{j}" for j in range(n_classes)]


def export_surface(net, ds: Dataset, resolution: int, margin: float,
                   feature_mean=None, feature_scale=None) -> np.ndarray:
    """Probability grid over a 2-D dataset's bounding box expanded by `margin`.

    Returns a (resolution^2, 2 + C) array of (x1, x2, p_0..p_{C-1}) rows; x1
    varies fastest. Pass the training standardizer so grid points enter the
    net in model coordinates while the emitted x1/x2 stay in data coordinates.
    """
    if ds.n_features != 2:
        raise ValueError(f"decision surface needs 2-D features, got {ds.n_features}-D")
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    if margin < 0:
        raise ValueError(f"margin must be nonnegative, got {margin}")
    lo = ds.features.min(axis=0) - margin
    hi = ds.features.max(axis=0) + margin
    xs = np.linspace(lo[0], hi[0], resolution)
    ys = np.linspace(lo[1], hi[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    model_points = points
    if feature_mean is not None:
        model_points = apply_standardizer(points, feature_mean, feature_scale)
    probs = network.forward(net, model_points)
    return np.column_stack([points, probs])


@dataclass(frozen=True)
class KdeTable:
    """Gaussian kernel density estimate on a fixed evaluation grid."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n_samples: int


def _silverman_bandwidth(values: np.ndarray) -> float:
    sd = float(values.std(ddof=1))
    q75, q25 = np.percentile(values, [75.0, 25.0])
    iqr_scale = float(q75 - q25) / 1.34
    candidates = [s for s in (sd, iqr_scale) if s > 0.0]
    if not candidates:
        raise ValueError("cannot pick a bandwidth for a constant sample")
    return 0.9 * min(candidates) * len(values) ** (-0.2)


def _gaussian_kde(values: np.ndarray, bandwidth) -> KdeTable:
    values = np.asarray(values, np.float64)
    if values.size < 2:
        raise ValueError(f"density estimate needs >= 2 values, got {values.size}")
    h = _silverman_bandwidth(values) if bandwidth == "auto" else float(bandwidth)
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    # 5 bandwidths of slack keeps >1-1e-3 of the kernel mass on the grid.
    grid = np.linspace(values.min() - 5.0 * h, values.max() + 5.0 * h,
                       KDE_GRID_POINTS)
    z = (grid[None, :] - values[:, None]) / h
    density = np.exp(-0.5 * z * z).mean(axis=0) / (h * math.sqrt(2.0 * math.pi))
    return KdeTable(grid, density, h, int(values.size))


def export_mixed_distribution(ds: Dataset, spec: SamplerSpec, n_batches: int,
                              bandwidth="auto") -> tuple[KdeTable, KdeTable]:
    """Density estimates of sampler output on a 1-D dataset.

    Collects `n_batches` batches and returns KDE tables for (a) the mixed
    feature values and (b) the soft-label mass assigned to the minority class
    (the class with the fewest rows, lowest index on ties).
    """
    if ds.n_features != 1:
        raise ValueError(f"mixed-distribution export needs 1-D features, got {ds.n_features}-D")
    if n_batches < 1:
        raise ValueError(f"n_batches must be >= 1, got {n_batches}")
    minority = int(np.argmin(ds.class_counts()))
    sampler = MiniBatchSampler(ds, spec)
    feature_values, label_values = [], []
    for _ in range(n_batches):
        batch = sampler.next_batch()
        feature_values.append(batch.features[:, 0])
        label_values.append(batch.soft_labels[:, minority])
    features = np.concatenate(feature_values)
    labels = np.concatenate(label_values)
    return _gaussian_kde(features, bandwidth), _gaussian_kde(labels, bandwidth)


_CONFIG_KEYS = {
    "name", "seed", "standardize", "out_dir", "jobs",
    "imbalance_ratios", "minority_classes", "methods",
    "dataset", "sampler", "train", "split",
}
_SAMPLER_KEYS = {"batch_size", "alpha", "k_neighbors", "overrides"}
_TRAIN_KEYS = {"epochs", "patience", "learning_rate", "hidden_dims", "dropout_rate"}
_SPLIT_KEYS = {"folds", "repetitions", "validation_fraction"}


def _check_keys(table: dict, allowed: set, where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ValueError(f"unknown config key(s) in {where}: {sorted(unknown)}")


def load_config(path) -> ExperimentConfig:
    """Parse a TOML experiment config; unknown keys are errors.

    Key tree (defaults in parentheses):
      name, seed (0), standardize (true), out_dir ("results"), jobs (1),
      imbalance_ratios, minority_classes, methods
      [dataset]  kind + generator/CSV params (see DataSource)
      [sampler]  batch_size (64), alpha (0.1), k_neighbors (5),
                 [sampler.overrides.<method>] same keys minus overrides
      [train]    epochs (200), patience (20), learning_rate (1e-3),
                 hidden_dims ([64, 64, 32]), dropout_rate (0.1)
      [split]    folds (2), repetitions (10), validation_fraction (0.3)
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    _check_keys(raw, _CONFIG_KEYS, "top level")
    for key in ("name", "dataset", "imbalance_ratios", "minority_classes", "methods"):
        if key not in raw:
            raise ValueError(f"config is missing required key {key!r}")

    dataset = dict(raw["dataset"])
    if "kind" not in dataset:
        raise ValueError("config [dataset] table is missing 'kind'")
    source = DataSource(dataset.pop("kind"), dataset)

    sampler = dict(raw.get("sampler", {}))
    _check_keys(sampler, _SAMPLER_KEYS, "[sampler]")
    overrides = {m: dict(o) for m, o in sampler.pop("overrides", {}).items()}

    train_raw = dict(raw.get("train", {}))
    _check_keys(train_raw, _TRAIN_KEYS, "[train]")
    if "hidden_dims" in train_raw:
        train_raw["hidden_dims"] = tuple(int(h) for h in train_raw["hidden_dims"])
    train_cfg = TrainConfig(**train_raw)

    split_raw = dict(raw.get("split", {}))
    _check_keys(split_raw, _SPLIT_KEYS, "[split]")

    return ExperimentConfig(
        name=str(raw["name"]),
        source=source,
        minority_classes=raw["minority_classes"],
        imbalance_ratios=raw["imbalance_ratios"],
        methods=raw["methods"],
        batch_size=int(sampler.get("batch_size", 64)),
        alpha=float(sampler.get("alpha", 0.1)),
        k_neighbors=int(sampler.get("k_neighbors", 5)),
        method_overrides=overrides,
        train=train_cfg,
        folds=int(split_raw.get("folds", 2)),
        repetitions=int(split_raw.get("repetitions", 10)),
        validation_fraction=float(split_raw.get("validation_fraction", 0.3)),
        standardize=bool(raw.get("standardize", True)),
        out_dir=str(raw.get("out_dir", "results")),
        seed=int(raw.get("seed", 0)),
        jobs=int(raw.get("jobs", 1)),
    )
