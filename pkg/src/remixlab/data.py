"""Dataset construction, CSV ingestion, class imbalancing, and stratified splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .seeding import normalize_seed

__all__ = [
    "Dataset",
    "SplitPlan",
    "make_ring",
    "make_two_gaussians",
    "make_gaussian_mixture",
    "load_csv",
    "save_csv",
    "imbalance",
    "split",
    "stratified_holdout",
]


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled corpus: N x D features and class indices in 0..C-1.

    Every class index up to the maximum label must occur at least once, all
    feature values must be finite, and `class_names` (when given) must have
    one entry per class.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        features = _frozen_array(self.features, np.float64)
        labels = _frozen_array(self.labels, np.int64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        n, d = features.shape
        if n < 1 or d < 1:
            raise ValueError(f"need at least 1 row and 1 feature, got {features.shape}")
        if labels.shape != (n,):
            raise ValueError(f"labels shape {labels.shape} does not match {n} rows")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain NaN or Inf")
        if labels.min() < 0:
            raise ValueError("labels must be nonnegative class indices")
        n_classes = int(labels.max()) + 1
        if n_classes < 2:
            raise ValueError("dataset must contain at least 2 classes")
        counts = np.bincount(labels, minlength=n_classes)
        if np.any(counts == 0):
            missing = int(np.flatnonzero(counts == 0)[0])
            raise ValueError(f"class {missing} has no samples")
        names = self.class_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != n_classes:
                raise ValueError(
                    f"class_names has {len(names)} entries for {n_classes} classes"
                )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_names)


@dataclass(frozen=True)
class SplitPlan:
    """Cross-validation layout: repeated stratified folds plus a validation cut."""

    fold_count: int = 2
    repetitions: int = 10
    validation_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.fold_count < 2:
            raise ValueError(f"fold_count must be >= 2, got {self.fold_count}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must lie in (0, 1), got {self.validation_fraction}"
            )


def make_ring(n_major: int, n_minor: int, noise: float, seed: int) -> Dataset:
    """Binary 2-D toy problem: a noisy unit ring (class 0) around a tight
    Gaussian core at the origin (class 1)."""
    if n_major < 1 or n_minor < 1:
        raise ValueError(f"counts must be positive, got {n_major}/{n_minor}")
    if noise < 0:
        raise ValueError(f"noise must be nonnegative, got {noise}")
    rng = np.random.default_rng(normalize_seed(seed))
    theta = rng.uniform(0.0, 2.0 * np.pi, n_major)
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    ring = ring + noise * rng.standard_normal((n_major, 2))
    core = noise * rng.standard_normal((n_minor, 2))
    features = np.vstack([ring, core])
    labels = np.concatenate([np.zeros(n_major, np.int64), np.ones(n_minor, np.int64)])
    return Dataset(features, labels)


def make_two_gaussians(
    n_major: int,
    n_minor: int,
    separation: float = 2.0,
    noise: float = 1.0,
    dim: int = 2,
    seed: int = 0,
) -> Dataset:
    """Two isotropic Gaussians `separation` apart along the first axis;
    class overlap is controlled by separation/noise."""
    if n_major < 1 or n_minor < 1:
        raise ValueError(f"counts must be positive, got {n_major}/{n_minor}")
    if noise <= 0:
        raise ValueError(f"noise must be positive, got {noise}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(normalize_seed(seed))
    major = noise * rng.standard_normal((n_major, dim))
    minor = noise * rng.standard_normal((n_minor, dim))
    minor[:, 0] += separation
    features = np.vstack([major, minor])
    labels = np.concatenate([np.zeros(n_major, np.int64), np.ones(n_minor, np.int64)])
    return Dataset(features, labels)


def make_gaussian_mixture(
    counts,
    spread: float = 2.0,
    noise: float = 0.6,
    seed: int = 0,
) -> Dataset:
    """One isotropic 2-D Gaussian per class, means equally spaced on a circle
    of radius `spread`."""
    counts = [int(c) for c in counts]
    if len(counts) < 2:
        raise ValueError("need at least 2 class counts")
    if any(c < 1 for c in counts):
        raise ValueError(f"counts must be positive, got {counts}")
    if noise <= 0:
        raise ValueError(f"noise must be positive, got {noise}")
    rng = np.random.default_rng(normalize_seed(seed))
    blocks = []
    labels = []
    for c, n_c in enumerate(counts):
        angle = 2.0 * np.pi * c / len(counts)
        mean = spread * np.array([np.cos(angle), np.sin(angle)])
        blocks.append(mean + noise * rng.standard_normal((n_c, 2)))
        labels.append(np.full(n_c, c, np.int64))
    return Dataset(np.vstack(blocks), np.concatenate(labels))


def load_csv(path, label_column, has_header: bool = True) -> Dataset:
    """Load a numeric CSV with one label column.

    Labels are mapped to 0..C-1 in order of first appearance; the original
    label tokens are kept in `class_names`. The label column is selected by
    name (requires a header) or by 0-based index.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: file is empty")

    header = None
    data_rows = rows
    first_line = 1
    if has_header:
        header = [h.strip() for h in rows[0]]
        data_rows = rows[1:]
        first_line = 2
    if not data_rows:
        raise ValueError(f"{path}: no data rows")

    width = len(data_rows[0])
    if isinstance(label_column, int):
        label_idx = label_column
        if not 0 <= label_idx < width:
            raise ValueError(f"{path}: label column index {label_column} out of range")
    else:
        if header is None:
            raise ValueError("label column by name requires has_header=True")
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r} in header")
        label_idx = header.index(label_column)

    features = []
    label_tokens = []
    for i, row in enumerate(data_rows):
        line = first_line + i
        if len(row) != width:
            raise ValueError(f"{path}: row {line} has {len(row)} cells, expected {width}")
        parsed = []
        for j, cell in enumerate(row):
            if j == label_idx:
                continue
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path}: cannot parse {cell.strip()!r} as a number "
                    f"at row {line}, column {j + 1}"
                ) from None
        features.append(parsed)
        label_tokens.append(row[label_idx].strip())

    mapping: dict[str, int] = {}
    for tok in label_tokens:
        if tok not in mapping:
            mapping[tok] = len(mapping)
    if len(mapping) < 2:
        raise ValueError(f"{path}: only one class present ({label_tokens[0]!r})")
    labels = np.array([mapping[tok] for tok in label_tokens], np.int64)
    return Dataset(np.asarray(features, np.float64), labels, tuple(mapping))


def save_csv(ds: Dataset, path) -> None:
    """Write a dataset as CSV with header x0..x{D-1},label; floats use their
    shortest round-trip representation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(ds.n_features)] + ["label"])
        for row, y in zip(ds.features, ds.labels):
            name = ds.class_names[y] if ds.class_names else str(int(y))
            writer.writerow([repr(float(v)) for v in row] + [name])


def imbalance(ds: Dataset, minority_classes, target_ir: float, seed: int) -> Dataset:
    """Downsample the minority classes so total-minority / total-majority
    equals `target_ir`, splitting the minority budget evenly across classes.

    Majority rows are kept untouched and row order is preserved.
    """
    minority = sorted({int(c) for c in minority_classes})
    if not minority:
        raise ValueError("minority_classes must be nonempty")
    all_classes = set(range(ds.n_classes))
    if not set(minority) <= all_classes:
        raise ValueError(f"minority classes {minority} outside 0..{ds.n_classes - 1}")
    if set(minority) == all_classes:
        raise ValueError("minority_classes must be a proper subset of all classes")
    if not 0.0 < target_ir <= 1.0:
        raise ValueError(f"target_ir must lie in (0, 1], got {target_ir}")

    counts = ds.class_counts()
    majority_total = int(counts.sum() - counts[minority].sum())
    target = int(round(target_ir * majority_total / len(minority)))
    min_ir = len(minority) / majority_total
    max_ir = min(int(counts[c]) for c in minority) * len(minority) / majority_total
    if target < 1:
        raise ValueError(
            f"target_ir {target_ir} would leave a minority class empty; "
            f"minimum achievable IR is {min_ir:.6g}"
        )
    for c in minority:
        if target > counts[c]:
            raise ValueError(
                f"target_ir {target_ir} needs {target} rows of class {c} but only "
                f"{int(counts[c])} exist (no upsampling); achievable IR range is "
                f"[{min_ir:.6g}, {max_ir:.6g}]"
            )

    rng = np.random.default_rng(normalize_seed(seed))
    keep = [np.flatnonzero(~np.isin(ds.labels, minority))]
    for c in minority:
        idx = np.flatnonzero(ds.labels == c)
        keep.append(rng.choice(idx, size=target, replace=False))
    return ds.subset(np.sort(np.concatenate(keep)))


def _stratified_val_cut(class_rows: dict[int, np.ndarray], fraction: float):
    """Split per-class row pools into (rest, held) taking ~fraction per class,
    at least 1 row on each side."""
    rest, held = [], []
    for c, rows in class_rows.items():
        if len(rows) < 2:
            raise ValueError(
                f"class {c} has {len(rows)} training rows; need at least 2 "
                "to carve out a stratified validation split"
            )
        n_val = int(round(fraction * len(rows)))
        n_val = min(max(n_val, 1), len(rows) - 1)
        held.append(rows[:n_val])
        rest.append(rows[n_val:])
    return np.concatenate(rest), np.concatenate(held)


def split(ds: Dataset, plan: SplitPlan) -> list[tuple[Dataset, Dataset, Dataset]]:
    """Repeated stratified k-fold with a stratified validation cut.

    Per repetition the dataset is reshuffled, partitioned into
    `plan.fold_count` stratified folds, and each fold serves once as the test
    set; `plan.validation_fraction` of the remaining rows (per class) becomes
    the validation set. Returns fold_count x repetitions (train, val, test)
    triples, deterministic in `plan.seed`.
    """
    counts = ds.class_counts()
    for c, n_c in enumerate(counts):
        if n_c < plan.fold_count:
            raise ValueError(
                f"class {c} has {int(n_c)} samples, fewer than fold_count={plan.fold_count}"
            )
    triples = []
    for rep in range(plan.repetitions):
        rng = np.random.default_rng([normalize_seed(plan.seed), rep])
        class_folds = {}
        for c in range(ds.n_classes):
            shuffled = rng.permutation(np.flatnonzero(ds.labels == c))
            class_folds[c] = np.array_split(shuffled, plan.fold_count)
        for f in range(plan.fold_count):
            test_idx = np.concatenate([class_folds[c][f] for c in class_folds])
            pools = {
                c: np.concatenate(
                    [class_folds[c][g] for g in range(plan.fold_count) if g != f]
                )
                for c in class_folds
            }
            train_idx, val_idx = _stratified_val_cut(pools, plan.validation_fraction)
            triples.append(
                (
                    ds.subset(np.sort(train_idx)),
                    ds.subset(np.sort(val_idx)),
                    ds.subset(np.sort(test_idx)),
                )
            )
    return triples


def stratified_holdout(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Single stratified (rest, held) split with ~fraction per class held out."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(normalize_seed(seed))
    pools = {
        c: rng.permutation(np.flatnonzero(ds.labels == c)) for c in range(ds.n_classes)
    }
    rest_idx, held_idx = _stratified_val_cut(pools, fraction)
    return ds.subset(np.sort(rest_idx)), ds.subset(np.sort(held_idx))
