"""Dense ReLU classifier with inverted dropout, soft-label cross-entropy,
Adam updates, early-stopped training, and checkpoint I/O."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .data import Dataset
from .sampling import MiniBatchSampler, SamplerSpec
from .seeding import derive_seed, normalize_seed

__all__ = [
    "Network",
    "AdamState",
    "TrainConfig",
    "TrainHistory",
    "TrainingDivergedError",
    "init_network",
    "forward",
    "loss",
    "backward",
    "init_adam",
    "adam_step",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

LOG_EPS = 1e-12

CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss or parameters become non-finite."""

    def __init__(self, message: str, last_finite_epoch: int, history: "TrainHistory"):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch
        self.history = history


@dataclass
class Network:
    """Feed-forward net: ReLU hidden layers, softmax output, weight matrices
    stored (fan_in, fan_out)."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float = 0.1

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy_parameters(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def set_parameters(self, weights, biases) -> None:
        self.weights = [w.copy() for w in weights]
        self.biases = [b.copy() for b in biases]


def init_network(layer_dims, dropout_rate: float = 0.1, seed: int = 0) -> Network:
    """He-uniform weights, zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError(f"need input and output dims at least, got {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be positive, got {dims}")
    if dims[-1] < 2:
        raise ValueError(f"output layer needs >= 2 classes, got {dims[-1]}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")
    rng = np.random.default_rng(normalize_seed(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(dims, weights, biases, dropout_rate)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_input(net: Network, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, np.float64)
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ValueError(
            f"input shape {x.shape} does not match input dim {net.layer_dims[0]}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains NaN or Inf")
    return x


def _forward_cached(net: Network, x: np.ndarray, train_mode: bool, rng):
    """Forward pass returning probabilities plus the per-layer
    (input, pre-activation, dropout mask) caches backward needs."""
    x = _check_input(net, x)
    if train_mode and net.dropout_rate > 0.0 and rng is None:
        raise ValueError("training-mode forward with dropout needs an rng")
    a = x
    caches = []
    keep = 1.0 - net.dropout_rate
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w + b
        h = np.maximum(z, 0.0)
        mask = None
        if train_mode and net.dropout_rate > 0.0:
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        caches.append((a, z, mask))
        a = h
    logits = a @ net.weights[-1] + net.biases[-1]
    caches.append((a, logits, None))
    return _softmax(logits), caches


def forward(net: Network, x: np.ndarray, train_mode: bool = False, rng=None) -> np.ndarray:
    """Class probabilities, one row per input row. Eval mode (the default) is
    deterministic; train mode applies inverted dropout to hidden activations."""
    probs, _ = _forward_cached(net, x, train_mode, rng)
    return probs


def loss(probs: np.ndarray, soft_labels: np.ndarray, weights=None) -> float:
    """Weighted mean categorical cross-entropy against soft labels."""
    probs = np.asarray(probs, np.float64)
    soft_labels = np.asarray(soft_labels, np.float64)
    if probs.shape != soft_labels.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs labels {soft_labels.shape}")
    ce = -(soft_labels * np.log(probs + LOG_EPS)).sum(axis=1)
    if weights is None:
        return float(ce.mean())
    weights = np.asarray(weights, np.float64)
    if weights.shape != (probs.shape[0],):
        raise ValueError(f"weights shape {weights.shape} does not match batch")
    return float((weights * ce).mean())


def backward(net: Network, x: np.ndarray, soft_labels: np.ndarray, weights=None, rng=None):
    """Gradients of loss(forward(x)) w.r.t. every parameter, sharing one
    dropout draw with the paired forward pass.

    Returns (grads, loss_value) where grads is a list of (dW, db) per layer.
    """
    soft_labels = np.asarray(soft_labels, np.float64)
    probs, caches = _forward_cached(net, x, train_mode=True, rng=rng)
    if probs.shape != soft_labels.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs labels {soft_labels.shape}")
    b = probs.shape[0]
    w_vec = np.ones(b) if weights is None else np.asarray(weights, np.float64)
    if w_vec.shape != (b,):
        raise ValueError(f"weights shape {w_vec.shape} does not match batch")

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * net.n_layers
    delta = (probs - soft_labels) * (w_vec / b)[:, None]
    a_prev = caches[-1][0]
    grads[-1] = (a_prev.T @ delta, delta.sum(axis=0))
    upstream = delta @ net.weights[-1].T
    for layer in range(net.n_layers - 2, -1, -1):
        a_prev, z, mask = caches[layer]
        if mask is not None:
            upstream = upstream * mask
        dz = upstream * (z > 0.0)
        grads[layer] = (a_prev.T @ dz, dz.sum(axis=0))
        if layer > 0:
            upstream = dz @ net.weights[layer].T
    loss_value = loss(probs, soft_labels, weights)
    return grads, loss_value


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter shapes."""

    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m_weights: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)
    timestep: int = 0


def init_adam(net: Network, step_size: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    if step_size <= 0 or epsilon <= 0:
        raise ValueError("step_size and epsilon must be positive")
    if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
        raise ValueError("beta1 and beta2 must lie in (0, 1)")
    return AdamState(
        step_size,
        beta1,
        beta2,
        epsilon,
        [np.zeros_like(w) for w in net.weights],
        [np.zeros_like(w) for w in net.weights],
        [np.zeros_like(b) for b in net.biases],
        [np.zeros_like(b) for b in net.biases],
    )


def adam_step(net: Network, grads, state: AdamState) -> None:
    """One bias-corrected Adam update, in place on net and state."""
    if len(grads) != net.n_layers:
        raise ValueError(f"got {len(grads)} gradient pairs for {net.n_layers} layers")
    state.timestep += 1
    c1 = 1.0 - state.beta1 ** state.timestep
    c2 = 1.0 - state.beta2 ** state.timestep
    for layer, (dw, db) in enumerate(grads):
        for param, g, m, v in (
            (net.weights[layer], dw, state.m_weights[layer], state.v_weights[layer]),
            (net.biases[layer], db, state.m_biases[layer], state.v_biases[layer]),
        ):
            if g.shape != param.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {param.shape}")
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * np.square(g)
            param -= state.step_size * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


@dataclass(frozen=True)
class TrainConfig:
    """Epoch budget, early stopping, and architecture knobs."""

    epochs: int = 200
    patience: int = 20
    learning_rate: float = 1e-3
    hidden_dims: tuple[int, ...] = (64, 64, 32)
    dropout_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))


@dataclass
class TrainHistory:
    """Per-epoch training curve plus where early stopping settled."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_gmean: list[float] = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0


def train(ds_train: Dataset, ds_val: Dataset, spec: SamplerSpec,
          cfg: TrainConfig) -> tuple[Network, TrainHistory]:
    """Train on sampler batches, track validation loss per epoch, keep the
    best-validation parameters, stop after `cfg.patience` non-improving
    epochs. Fully deterministic given (datasets, spec, cfg)."""
    if ds_train.n_features != ds_val.n_features:
        raise ValueError("train and validation feature dims differ")
    if ds_train.n_classes != ds_val.n_classes:
        raise ValueError("train and validation class counts differ")

    net = init_network(
        (ds_train.n_features, *cfg.hidden_dims, ds_train.n_classes),
        cfg.dropout_rate,
        seed=derive_seed(cfg.seed, "init"),
    )
    state = init_adam(net, cfg.learning_rate)
    sampler = MiniBatchSampler(ds_train, spec)
    dropout_rng = np.random.default_rng(derive_seed(cfg.seed, "dropout"))
    val_one_hot = np.eye(ds_val.n_classes)[ds_val.labels]

    history = TrainHistory()
    best_loss = math.inf
    best_params = net.copy_parameters()
    stale = 0
    for epoch in range(cfg.epochs):
        epoch_losses = []
        for _ in range(sampler.batches_per_epoch):
            batch = sampler.next_batch()
            grads, batch_loss = backward(
                net, batch.features, batch.soft_labels, batch.weights, dropout_rng
            )
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite training loss in epoch {epoch}", epoch - 1, history
                )
            epoch_losses.append(batch_loss)
            adam_step(net, grads, state)
        if not all(np.all(np.isfinite(w)) for w in net.weights + net.biases):
            raise TrainingDivergedError(
                f"non-finite parameters after epoch {epoch}", epoch - 1, history
            )
        val_probs = forward(net, ds_val.features)
        val_loss = loss(val_probs, val_one_hot)
        history.train_loss.append(float(np.mean(epoch_losses)))
        history.val_loss.append(val_loss)
        history.val_gmean.append(metrics.evaluate(val_probs, ds_val.labels).gmean)
        history.epochs_run = epoch + 1
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = net.copy_parameters()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > cfg.patience:
                break
    net.set_parameters(*best_params)
    return net, history


def save_checkpoint(path, net: Network, class_names=None,
                    feature_mean=None, feature_scale=None) -> None:
    """Write an .npz checkpoint: format_version, layer_dims, dropout_rate,
    per-layer W{i}/b{i} float64 arrays, plus optional class_names and
    standardization vectors."""
    payload = {
        "format_version": np.int64(CHECKPOINT_VERSION),
        "layer_dims": np.asarray(net.layer_dims, np.int64),
        "dropout_rate": np.float64(net.dropout_rate),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        payload[f"W{i}"] = np.asarray(w, np.float64)
        payload[f"b{i}"] = np.asarray(b, np.float64)
    if class_names is not None:
        payload["class_names"] = np.asarray([str(s) for s in class_names])
    if feature_mean is not None:
        payload["feature_mean"] = np.asarray(feature_mean, np.float64)
        payload["feature_scale"] = np.asarray(feature_scale, np.float64)
    np.savez(path, **payload)


def load_checkpoint(path) -> tuple[Network, dict]:
    """Load a checkpoint written by save_checkpoint; returns (net, meta) with
    meta holding class_names/feature_mean/feature_scale when present."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = tuple(int(d) for d in data["layer_dims"])
        weights = [data[f"W{i}"] for i in range(len(dims) - 1)]
        biases = [data[f"b{i}"] for i in range(len(dims) - 1)]
        net = Network(dims, weights, biases, float(data["dropout_rate"]))
        meta = {"class_names": None, "feature_mean": None, "feature_scale": None}
        if "class_names" in data:
            meta["class_names"] = tuple(str(s) for s in data["class_names"])
        if "feature_mean" in data:
            meta["feature_mean"] = data["feature_mean"]
            meta["feature_scale"] = data["feature_scale"]
    return net, meta
