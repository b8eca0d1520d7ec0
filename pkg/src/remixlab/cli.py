"""Command-line interface: dataset generation, training, evaluation, alpha
sweeps, method comparisons, and surface/density exports.

Every subcommand prints its fully resolved configuration before doing any
work; failures exit 1 with a single `error: <Type>: <message>` line on
stderr, bad flags exit 2 via the usual usage message.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

import numpy as np

from . import harness, metrics, network
from .data import imbalance, load_csv, save_csv, stratified_holdout
from .harness import DataSource, build_dataset
from .network import TrainConfig, load_checkpoint, save_checkpoint
from .sampling import STRATEGIES, SamplerSpec
from .seeding import derive_seed

__all__ = ["main"]


def _floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _label_column(text: str):
    return int(text) if text.lstrip("+-").isdigit() else text


def _print_config(pairs) -> None:
    print("resolved config:")
    for key, value in pairs:
        print(f"  {key} = {value}")


def _args_pairs(args, keys) -> list[tuple[str, object]]:
    return [(key, getattr(args, key)) for key in keys]


def _experiment_pairs(cfg: harness.ExperimentConfig) -> list[tuple[str, object]]:
    pairs = [
        ("name", cfg.name),
        ("dataset.kind", cfg.source.kind),
    ]
    pairs += [(f"dataset.{k}", v) for k, v in sorted(cfg.source.params.items())]
    pairs += [
        ("minority_classes", list(cfg.minority_classes)),
        ("imbalance_ratios", list(cfg.imbalance_ratios)),
        ("methods", list(cfg.methods)),
        ("sampler.batch_size", cfg.batch_size),
        ("sampler.alpha", cfg.alpha),
        ("sampler.k_neighbors", cfg.k_neighbors),
    ]
    for m in sorted(cfg.method_overrides):
        for k, v in sorted(cfg.method_overrides[m].items()):
            pairs.append((f"sampler.overrides.{m}.{k}", v))
    pairs += [
        ("train.epochs", cfg.train.epochs),
        ("train.patience", cfg.train.patience),
        ("train.learning_rate", cfg.train.learning_rate),
        ("train.hidden_dims", list(cfg.train.hidden_dims)),
        ("train.dropout_rate", cfg.train.dropout_rate),
        ("split.folds", cfg.folds),
        ("split.repetitions", cfg.repetitions),
        ("split.validation_fraction", cfg.validation_fraction),
        ("standardize", cfg.standardize),
        ("out_dir", cfg.out_dir),
        ("seed", cfg.seed),
        ("jobs", cfg.jobs),
    ]
    return pairs


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------- gen


def _cmd_gen(args) -> int:
    _print_config(_args_pairs(args, [
        "kind", "n_major", "n_minor", "noise", "separation", "dim", "counts",
        "spread", "ir", "minority_classes", "seed", "out",
    ]))
    params = {}
    if args.kind in ("ring", "two_gaussians"):
        if args.n_major is None:
            raise ValueError(f"--n-major is required for kind {args.kind!r}")
        params["n_major"] = args.n_major
        if args.n_minor is not None:
            params["n_minor"] = args.n_minor
        if args.noise is not None:
            params["noise"] = args.noise
        if args.kind == "two_gaussians":
            if args.separation is not None:
                params["separation"] = args.separation
            if args.dim is not None:
                params["dim"] = args.dim
    elif args.kind == "gaussian_mixture":
        if args.counts is None:
            raise ValueError("--counts is required for kind 'gaussian_mixture'")
        params["counts"] = args.counts
        if args.spread is not None:
            params["spread"] = args.spread
        if args.noise is not None:
            params["noise"] = args.noise
    ds = build_dataset(DataSource(args.kind, params), derive_seed(args.seed, "dataset"))
    if args.ir is not None:
        ds = imbalance(ds, args.minority_classes, args.ir,
                       derive_seed(args.seed, "imbalance"))
    save_csv(ds, args.out)
    counts = ", ".join(
        f"class {c}: {int(n)}" for c, n in enumerate(ds.class_counts())
    )
    print(f"wrote {ds.n_samples} rows x {ds.n_features} features to {args.out} ({counts})")
    return 0


# ---------------------------------------------------------------- train


def _cmd_train(args) -> int:
    _print_config(_args_pairs(args, [
        "data", "label_column", "strategy", "alpha", "batch_size", "k_neighbors",
        "epochs", "patience", "learning_rate", "hidden_dims", "dropout_rate",
        "val_fraction", "standardize", "seed", "out",
    ]))
    ds = load_csv(args.data, args.label_column)
    ds_train, ds_val = stratified_holdout(
        ds, args.val_fraction, derive_seed(args.seed, "holdout")
    )
    feature_mean = feature_scale = None
    if args.standardize:
        feature_mean, feature_scale = harness.fit_standardizer(ds_train.features)
        ds_train = dataclasses.replace(
            ds_train,
            features=harness.apply_standardizer(ds_train.features, feature_mean, feature_scale),
        )
        ds_val = dataclasses.replace(
            ds_val,
            features=harness.apply_standardizer(ds_val.features, feature_mean, feature_scale),
        )
    spec = SamplerSpec(args.strategy, args.batch_size, args.alpha,
                       args.k_neighbors, seed=derive_seed(args.seed, "sampler"))
    cfg = TrainConfig(args.epochs, args.patience, args.learning_rate,
                      tuple(args.hidden_dims), args.dropout_rate,
                      seed=derive_seed(args.seed, "train"))
    net, history = network.train(ds_train, ds_val, spec, cfg)
    save_checkpoint(args.out, net, ds.class_names,
                    feature_mean=feature_mean, feature_scale=feature_scale)
    print(f"trained {history.epochs_run} epochs; best epoch {history.best_epoch} "
          f"(val loss {history.val_loss[history.best_epoch]:.6f}, "
          f"val g-mean {history.val_gmean[history.best_epoch]:.6f})")
    print(f"checkpoint written to {args.out}")
    return 0


# ---------------------------------------------------------------- eval


def _load_for_checkpoint(data_path, label_column, checkpoint_path):
    """Load a CSV and align it with a checkpoint's class order and scaling.

    Returns (features ready for the net, labels in checkpoint class order,
    net, display class names).
    """
    net, meta = load_checkpoint(checkpoint_path)
    ds = load_csv(data_path, label_column)
    n_out = net.layer_dims[-1]
    names = meta["class_names"]
    if names is not None:
        index = {name: j for j, name in enumerate(names)}
        ds_names = ds.class_names or tuple(str(c) for c in range(ds.n_classes))
        missing = [n for n in ds_names if n not in index]
        if missing:
            raise ValueError(
                f"label(s) {missing} in {data_path} were not seen at training time "
                f"(checkpoint classes: {list(names)})"
            )
        labels = np.array([index[ds_names[y]] for y in ds.labels], np.int64)
    else:
        if ds.n_classes > n_out:
            raise ValueError(
                f"{data_path} has {ds.n_classes} classes but the checkpoint "
                f"predicts {n_out}"
            )
        names = tuple(str(c) for c in range(n_out))
        labels = ds.labels
    features = ds.features
    if meta["feature_mean"] is not None:
        features = harness.apply_standardizer(
            features, meta["feature_mean"], meta["feature_scale"]
        )
    return features, labels, net, names, ds


def _cmd_eval(args) -> int:
    _print_config(_args_pairs(args, ["data", "label_column", "checkpoint", "out"]))
    features, labels, net, names, _ = _load_for_checkpoint(
        args.data, args.label_column, args.checkpoint
    )
    report = metrics.evaluate(network.forward(net, features), labels)
    print(metrics.format_report(report, names))
    if args.out:
        _write_table(args.out, metrics.report_csv_header(report.n_classes),
                     [metrics.report_csv_row(report)])
        print(f"metrics written to {args.out}")
    return 0


# ---------------------------------------------------------------- surface


def _cmd_surface(args) -> int:
    _print_config(_args_pairs(args, [
        "data", "label_column", "checkpoint", "resolution", "margin", "out",
    ]))
    net, meta = load_checkpoint(args.checkpoint)
    ds = load_csv(args.data, args.label_column)
    grid = harness.export_surface(
        net, ds, args.resolution, args.margin,
        feature_mean=meta["feature_mean"], feature_scale=meta["feature_scale"],
    )
    n_classes = grid.shape[1] - 2
    _write_table(args.out, harness.surface_csv_header(n_classes),
                 ([repr(float(v)) for v in row] for row in grid))
    print(f"wrote {grid.shape[0]} grid rows to {args.out}")
    return 0


# ---------------------------------------------------------------- kde


def _cmd_kde(args) -> int:
    _print_config(_args_pairs(args, [
        "data", "label_column", "strategy", "alpha", "batch_size", "k_neighbors",
        "n_batches", "bandwidth", "seed", "out_dir",
    ]))
    ds = load_csv(args.data, args.label_column)
    spec = SamplerSpec(args.strategy, args.batch_size, args.alpha,
                       args.k_neighbors, seed=derive_seed(args.seed, "sampler"))
    bandwidth = "auto" if args.bandwidth == "auto" else float(args.bandwidth)
    feat_kde, label_kde = harness.export_mixed_distribution(
        ds, spec, args.n_batches, bandwidth
    )
    os.makedirs(args.out_dir, exist_ok=True)
    for name, table in (("features_kde.csv", feat_kde), ("labels_kde.csv", label_kde)):
        path = os.path.join(args.out_dir, name)
        _write_table(path, ["value", "density"],
                     ([repr(float(v)), repr(float(d))]
                      for v, d in zip(table.grid, table.density)))
        print(f"wrote {path} (bandwidth {table.bandwidth:.6g}, "
              f"{table.n_samples} samples)")
    return 0


# ---------------------------------------------------------------- compare / sweep


def _apply_overrides(cfg: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    if args.ir is not None:
        updates["imbalance_ratios"] = tuple(args.ir)
    if args.standardize is not None:
        updates["standardize"] = args.standardize
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.batch_size is not None:
        updates["batch_size"] = args.batch_size
    if args.k_neighbors is not None:
        updates["k_neighbors"] = args.k_neighbors
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _report_table(table: harness.ResultTable, out_dir) -> None:
    for path in table.write_csv(out_dir):
        print(f"wrote {path}")
    failed = table.failed_rows()
    print(f"{len(table.rows)} result rows ({len(failed)} failed)")
    for row in failed:
        print(f"  failed: {row.dataset} ir={row.ir} {row.method} "
              f"rep={row.repetition} fold={row.fold}: {row.error}")


def _cmd_compare(args) -> int:
    cfg = _apply_overrides(harness.load_config(args.config), args)
    _print_config(_experiment_pairs(cfg))
    table = harness.run_experiment(cfg)
    _report_table(table, cfg.out_dir)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _apply_overrides(harness.load_config(args.config), args)
    _print_config(_experiment_pairs(cfg) + [("alphas", list(args.alphas))])
    table = harness.sweep_alpha(cfg, args.alphas)
    _report_table(table, cfg.out_dir)
    return 0


# ---------------------------------------------------------------- parser


def _add_sampler_flags(p, with_strategy: bool) -> None:
    if with_strategy:
        p.add_argument("--strategy", choices=STRATEGIES, default="remix",
                       help="batch sampling strategy (default remix)")
        p.add_argument("--alpha", type=float, default=0.1,
                       help="mixing concentration, 0 disables mixing (default 0.1)")
        p.add_argument("--batch-size", type=int, default=64,
                       help="mini-batch size (default 64)")
        p.add_argument("--k-neighbors", type=int, default=5,
                       help="neighbour count for smote (default 5)")
    else:
        p.add_argument("--alpha", type=float, default=None,
                       help="override [sampler].alpha from the config")
        p.add_argument("--batch-size", type=int, default=None,
                       help="override [sampler].batch_size from the config")
        p.add_argument("--k-neighbors", type=int, default=None,
                       help="override [sampler].k_neighbors from the config")


def _add_experiment_flags(p) -> None:
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel workers over (split x method) cells")
    p.add_argument("--out-dir", default=None, help="override config out_dir")
    p.add_argument("--ir", type=_floats, default=None,
                   help="override imbalance_ratios, comma-separated")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                   default=None, help="override config standardize flag")
    _add_sampler_flags(p, with_strategy=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remixlab",
        description="Class-imbalance training strategies with calibration-aware evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    p.add_argument("--kind", required=True,
                   choices=("ring", "two_gaussians", "gaussian_mixture"))
    p.add_argument("--n-major", type=int, default=None)
    p.add_argument("--n-minor", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--separation", type=float, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--counts", type=_ints, default=None,
                   help="per-class counts for gaussian_mixture, comma-separated")
    p.add_argument("--spread", type=float, default=None)
    p.add_argument("--ir", type=float, default=None,
                   help="downsample minority classes to this imbalance ratio")
    p.add_argument("--minority-classes", type=_ints, default=[1],
                   help="classes treated as minority when --ir is given (default 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train a classifier and write a checkpoint")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--label-column", type=_label_column, default="label",
                   help="label column name or 0-based index (default 'label')")
    _add_sampler_flags(p, with_strategy=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--hidden-dims", type=_ints, default=[64, 64, 32],
                   help="comma-separated hidden layer sizes (default 64,64,32)")
    p.add_argument("--dropout-rate", type=float, default=0.1)
    p.add_argument("--val-fraction", type=float, default=0.3,
                   help="stratified fraction held out for early stopping")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                   default=True, help="z-score features from training statistics")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", type=_label_column, default="label")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None, help="optional metrics CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="cross-validate the mixing strategy over alphas")
    _add_experiment_flags(p)
    p.add_argument("--alphas", type=_floats, required=True,
                   help="comma-separated alpha values")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("surface", help="export a decision-surface grid CSV")
    p.add_argument("--data", required=True, help="2-D CSV defining the bounding box")
    p.add_argument("--label-column", type=_label_column, default="label")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--resolution", type=int, default=200,
                   help="grid points per axis (default 200)")
    p.add_argument("--margin", type=float, default=0.5,
                   help="padding around the data bounding box (default 0.5)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("kde", help="export mixed-sample density estimates (1-D data)")
    p.add_argument("--data", required=True, help="1-D CSV to sample batches from")
    p.add_argument("--label-column", type=_label_column, default="label")
    _add_sampler_flags(p, with_strategy=True)
    p.add_argument("--n-batches", type=int, default=200,
                   help="batches to collect (default 200)")
    p.add_argument("--bandwidth", default="auto",
                   help="kernel bandwidth, a number or 'auto' (default)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".",
                   help="directory for features_kde.csv and labels_kde.csv")
    p.set_defaults(func=_cmd_kde)

    p = sub.add_parser("compare", help="run the full method comparison from a config")
    _add_experiment_flags(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        detail = " ; ".join(
            part.strip() for part in str(exc).splitlines() if part.strip()
        ) or "unspecified failure"
        print(f"error: {type(exc).__name__}: {detail}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
