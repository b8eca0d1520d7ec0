"""Mini-batch strategies for imbalanced training.

Five strategies share one stateful sampler: plain epoch passes (baseline),
inverse-frequency instance weights (cost), per-batch synthetic oversampling
with hard labels (smote), convex feature/label mixing (mixup), and balanced
resampling followed by mixing (remix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .seeding import normalize_seed

__all__ = [
    "STRATEGIES",
    "Batch",
    "SamplerSpec",
    "MiniBatchSampler",
    "sample_beta",
    "mix",
    "cost_weights",
    "smote_interpolate",
]

STRATEGIES = ("baseline", "cost", "smote", "mixup", "remix")

_SOFT_LABEL_TOL = 1e-9


@dataclass(frozen=True)
class Batch:
    """One training mini-batch: features, row-stochastic soft labels, and
    positive per-instance loss weights (all 1 except for the cost strategy)."""

    features: np.ndarray
    soft_labels: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        features = np.asarray(self.features, np.float64)
        soft = np.asarray(self.soft_labels, np.float64)
        if features.ndim != 2 or soft.ndim != 2:
            raise ValueError("features and soft_labels must be 2-D")
        b = features.shape[0]
        if b < 1:
            raise ValueError("batch must contain at least one row")
        if soft.shape[0] != b:
            raise ValueError(f"soft_labels has {soft.shape[0]} rows for {b} features")
        weights = self.weights
        weights = np.ones(b) if weights is None else np.asarray(weights, np.float64)
        if weights.shape != (b,):
            raise ValueError(f"weights shape {weights.shape} does not match batch size {b}")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(soft))
                and np.all(np.isfinite(weights))):
            raise ValueError("batch contains NaN or Inf")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if soft.min() < 0.0 or soft.max() > 1.0:
            raise ValueError("soft label entries must lie in [0, 1]")
        row_sums = soft.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > _SOFT_LABEL_TOL:
            raise ValueError("soft label rows must sum to 1")
        for name, arr in (("features", features), ("soft_labels", soft), ("weights", weights)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SamplerSpec:
    """Which strategy to sample with and its knobs."""

    strategy: str
    batch_size: int
    alpha: float = 0.1
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.k_neighbors < 1:
            raise ValueError(f"k_neighbors must be >= 1, got {self.k_neighbors}")


def _gamma_draw(shape: float, rng: np.random.Generator) -> float:
    """One Gamma(shape, 1) variate; squeeze-and-reject for shape >= 1 and the
    power-of-uniform boost for shape < 1."""
    if shape < 1.0:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return _gamma_draw(shape + 1.0, rng) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.random()
        if u == 0.0:
            continue
        if u < 1.0 - 0.0331 * x * x * x * x:
            return d * v
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def sample_beta(alpha: float, rng: np.random.Generator) -> float:
    """Draw the mixing weight lambda ~ Beta(alpha, alpha) via two Gamma draws.

    alpha = 0 is the no-mix limit and returns exactly 1.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if alpha == 0:
        return 1.0
    x = _gamma_draw(alpha, rng)
    y = _gamma_draw(alpha, rng)
    if x + y == 0.0:
        # Both draws underflowed (tiny alpha); the limit law is fair on {0, 1}.
        return float(rng.integers(2))
    return x / (x + y)


def mix(features: np.ndarray, soft_labels: np.ndarray, lam: float, perm) -> tuple[np.ndarray, np.ndarray]:
    """Convexly combine each row with its permuted partner using one shared
    lambda: out = lam * row + (1 - lam) * row[perm]."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    features = np.asarray(features, np.float64)
    soft_labels = np.asarray(soft_labels, np.float64)
    perm = np.asarray(perm, np.int64)
    b = features.shape[0]
    if perm.shape != (b,) or not np.array_equal(np.sort(perm), np.arange(b)):
        raise ValueError(f"perm must be a permutation of 0..{b - 1}")
    mixed_x = lam * features + (1.0 - lam) * features[perm]
    mixed_y = lam * soft_labels + (1.0 - lam) * soft_labels[perm]
    return mixed_x, mixed_y


def smote_interpolate(x: np.ndarray, neighbor: np.ndarray, u: float) -> np.ndarray:
    """Point at fraction u of the way from x to its neighbor."""
    x = np.asarray(x, np.float64)
    return x + u * (np.asarray(neighbor, np.float64) - x)


def cost_weights(ds: Dataset) -> np.ndarray:
    """Inverse-frequency class weights w_c = N / (C * N_c), normalized so
    sum_c w_c * N_c = N."""
    counts = ds.class_counts().astype(np.float64)
    return ds.n_samples / (ds.n_classes * counts)


class MiniBatchSampler:
    """Stateful batch emitter for one (dataset, spec) pair.

    Owns the epoch cursor over a shuffled copy of the dataset, per-class
    reservoirs used when a class is missing from an incoming batch, and the
    RNG stream. Confine an instance to a single thread; the emitted Batch
    values are immutable and freely shareable.

    Test hooks: after each emitted batch, `last_premix_labels` holds the hard
    class indices just before any mixing, `last_lambda`/`last_perm` the latest
    mixing draw, and `last_smote_triples` the (seed, neighbor, synthetic)
    rows of the latest smote batch.
    """

    def __init__(self, ds: Dataset, spec: SamplerSpec):
        if spec.strategy in ("smote", "remix") and spec.batch_size < ds.n_classes:
            raise ValueError(
                f"batch_size {spec.batch_size} must be >= n_classes "
                f"{ds.n_classes} for strategy {spec.strategy!r}"
            )
        self.ds = ds
        self.spec = spec
        self.rng = np.random.default_rng(normalize_seed(spec.seed))
        self._class_rows = {
            c: np.flatnonzero(ds.labels == c) for c in range(ds.n_classes)
        }
        self._order = None
        self._cursor = 0
        self._reservoirs: dict[int, np.ndarray] = {}
        self._reservoir_pos: dict[int, int] = {}
        self._instance_weights = None
        if spec.strategy == "cost":
            self._instance_weights = cost_weights(ds)[ds.labels]
        self.last_premix_labels: np.ndarray | None = None
        self.last_lambda: float | None = None
        self.last_perm: np.ndarray | None = None
        self.last_smote_triples: list[tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(self.ds.n_samples / self.spec.batch_size)

    @property
    def per_class_target(self) -> int:
        return self.spec.batch_size // self.ds.n_classes

    def next_batch(self) -> Batch:
        method = {
            "baseline": self.baseline_batch,
            "cost": self.baseline_batch,
            "smote": self.smote_batch,
            "mixup": self.mixup_batch,
            "remix": self.remix_batch,
        }[self.spec.strategy]
        return method()

    def epoch(self):
        """Yield one full epoch pass of batches."""
        for _ in range(self.batches_per_epoch):
            yield self.next_batch()

    # -- strategies ---------------------------------------------------------

    def baseline_batch(self) -> Batch:
        idx = self._next_slice()
        y = self.ds.labels[idx]
        self.last_premix_labels = y.copy()
        weights = None
        if self._instance_weights is not None:
            weights = self._instance_weights[idx]
        return Batch(self.ds.features[idx], self._one_hot(y), weights)

    def mixup_batch(self) -> Batch:
        idx = self._next_slice()
        y = self.ds.labels[idx]
        self.last_premix_labels = y.copy()
        mixed_x, mixed_y = self._mix_pass(self.ds.features[idx], self._one_hot(y))
        return Batch(mixed_x, mixed_y)

    def remix_batch(self) -> Batch:
        idx = self._next_slice()
        x, y = self.balanced_resample(
            self.ds.features[idx], self.ds.labels[idx], self.per_class_target
        )
        self.last_premix_labels = y.copy()
        mixed_x, mixed_y = self._mix_pass(x, self._one_hot(y))
        return Batch(mixed_x, mixed_y)

    def smote_batch(self) -> Batch:
        """Rebalance the incoming batch to the per-class target: classes above
        the target are randomly undersampled, classes below it are topped up
        with hard-labeled interpolations between in-batch k-nearest
        same-class neighbors."""
        idx = self._next_slice()
        x_in = self.ds.features[idx]
        y_in = self.ds.labels[idx]
        target = self.per_class_target
        triples = []
        blocks = []
        labels = []
        for c in range(self.ds.n_classes):
            members = x_in[y_in == c]
            n = len(members)
            if n == 0:
                rows = self.ds.features[self._draw_reservoir(c, target)]
            elif n >= target:
                rows = members[self.rng.choice(n, size=target, replace=False)]
            else:
                synth = [
                    self._smote_sample(members, triples) for _ in range(target - n)
                ]
                rows = np.vstack([members, synth])
            blocks.append(rows)
            labels.append(np.full(target, c, np.int64))
        y = np.concatenate(labels)
        self.last_premix_labels = y.copy()
        self.last_smote_triples = triples
        return Batch(np.vstack(blocks), self._one_hot(y))

    def balanced_resample(
        self, features: np.ndarray, labels: np.ndarray, per_class: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Draw per_class rows with replacement from each class of the
        incoming batch; classes missing from the batch are drawn from the
        per-class reservoirs so every dataset class contributes."""
        if per_class < 1:
            raise ValueError(f"per_class must be >= 1, got {per_class}")
        blocks = []
        out_labels = []
        for c in range(self.ds.n_classes):
            members = features[labels == c]
            if len(members):
                rows = members[self.rng.integers(0, len(members), size=per_class)]
            else:
                rows = self.ds.features[self._draw_reservoir(c, per_class)]
            blocks.append(rows)
            out_labels.append(np.full(per_class, c, np.int64))
        return np.vstack(blocks), np.concatenate(out_labels)

    # -- internals ----------------------------------------------------------

    def _one_hot(self, labels: np.ndarray) -> np.ndarray:
        return np.eye(self.ds.n_classes)[labels]

    def _next_slice(self) -> np.ndarray:
        """Next consecutive slice of the shuffled epoch order (uniform without
        replacement within an epoch); reshuffles when exhausted."""
        n = self.ds.n_samples
        if self._order is None or self._cursor >= n:
            self._order = self.rng.permutation(n)
            self._cursor = 0
        end = min(self._cursor + self.spec.batch_size, n)
        idx = self._order[self._cursor:end]
        self._cursor = end
        return idx

    def _draw_reservoir(self, c: int, count: int) -> np.ndarray:
        """Take `count` dataset row indices of class c from its shuffled
        reservoir, reshuffling whenever the pool runs dry."""
        rows = self._class_rows[c]
        if len(rows) == 0:
            raise ValueError(f"class {c} has no samples to draw from")
        out = np.empty(count, np.int64)
        filled = 0
        while filled < count:
            pool = self._reservoirs.get(c)
            pos = self._reservoir_pos.get(c, 0)
            if pool is None or pos >= len(pool):
                pool = self.rng.permutation(rows)
                self._reservoirs[c] = pool
                pos = 0
            take = min(count - filled, len(pool) - pos)
            out[filled:filled + take] = pool[pos:pos + take]
            self._reservoir_pos[c] = pos + take
            filled += take
        return out

    def _mix_pass(self, features: np.ndarray, one_hot: np.ndarray):
        lam = sample_beta(self.spec.alpha, self.rng)
        perm = self.rng.permutation(len(features))
        self.last_lambda = lam
        self.last_perm = perm
        return mix(features, one_hot, lam, perm)

    def _smote_sample(self, members: np.ndarray, triples: list) -> np.ndarray:
        """One synthetic row interpolated toward one of the k nearest
        same-class neighbors; a singleton class is duplicated."""
        n = len(members)
        i = int(self.rng.integers(n))
        seed_row = members[i]
        if n == 1:
            neighbor = seed_row
            synthetic = seed_row.copy()
        else:
            dists = np.linalg.norm(members - seed_row, axis=1)
            order = np.argsort(dists, kind="stable")
            order = order[order != i][: min(self.spec.k_neighbors, n - 1)]
            neighbor = members[int(order[int(self.rng.integers(len(order)))])]
            synthetic = smote_interpolate(seed_row, neighbor, float(self.rng.random()))
        triples.append((seed_row.copy(), neighbor.copy(), synthetic.copy()))
        return synthetic
