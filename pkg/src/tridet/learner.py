"""Dense feed-forward multi-label learner: manual backpropagation, Adam
optimization, and class-weighted binary cross-entropy with sigmoid outputs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import metrics
from .data import LabeledDataset

# probabilities are clamped to this range before any log or logit
PROB_CLAMP = 1e-7

CHECKPOINT_FORMAT = "tridet-model-v1"


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of the learner: input width, hidden widths, event count."""

    input_dim: int
    hidden_layers: tuple[int, ...] = (16,)
    num_classes: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer sizes must be >= 1")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + self.hidden_layers + (self.num_classes,)


@dataclass(eq=False)
class Model:
    """Parameters of the feed-forward learner producing one logit per event.

    Hidden layers use tanh (smooth everywhere, so analytic gradients can be
    validated against finite differences); the output layer is linear and
    probabilities come from a per-class sigmoid.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: ModelConfig

    def __post_init__(self):
        sizes = self.config.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("parameter count does not match config")
        for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if self.weights[l].shape != (fan_in, fan_out) or self.biases[l].shape != (fan_out,):
                raise ValueError(f"layer {l} shape mismatch with config")
            if not (np.isfinite(self.weights[l]).all() and np.isfinite(self.biases[l]).all()):
                raise ValueError(f"layer {l} has non-finite parameters")

    def copy(self) -> "Model":
        return Model([w.copy() for w in self.weights],
                     [b.copy() for b in self.biases], self.config)

    def predict_logits(self, features: np.ndarray) -> np.ndarray:
        return forward_batch(self, features)

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return expit(forward_batch(self, features))


@dataclass(frozen=True)
class EarlyStop:
    """Stop after ``patience`` epochs without a lower mean dev DET-AUC."""

    dev: LabeledDataset
    patience: int = 10


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    early_stop: EarlyStop | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")


def init_model(config: ModelConfig) -> Model:
    """Seeded symmetric initialization: scaled-uniform weights, zero biases."""
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Model(weights, biases, config)


def _forward_cached(model: Model, X: np.ndarray):
    """Forward pass keeping every activation for backprop. Returns (acts, logits)."""
    acts = [X]
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        acts.append(np.tanh(acts[-1] @ W + b))
    logits = acts[-1] @ model.weights[-1] + model.biases[-1]
    return acts, logits


def forward_batch(model: Model, X: np.ndarray) -> np.ndarray:
    """Logits for a (n, input_dim) batch."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise ValueError(f"expected (n, {model.config.input_dim}) features, got {X.shape}")
    return _forward_cached(model, X)[1]


def forward(model: Model, x: np.ndarray) -> np.ndarray:
    """Logits for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.config.input_dim,):
        raise ValueError(f"expected a length-{model.config.input_dim} vector, got shape {x.shape}")
    return forward_batch(model, x[None, :])[0]


def sigmoid_t(z, temperature: float = 1.0):
    """Temperature-scaled sigmoid 1 / (1 + exp(-z / T)).

    T = 1 is the standard sigmoid; larger T flattens the output toward 0.5.
    Evaluated via expit, which saturates gracefully instead of overflowing.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return expit(np.asarray(z, dtype=np.float64) / temperature)


def _as_class_weights(weights, num_classes: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 0:
        w = np.full(num_classes, float(w))
    if w.shape != (num_classes,):
        raise ValueError(f"expected {num_classes} class weights, got shape {w.shape}")
    if not ((w > 0).all() and np.isfinite(w).all()):
        raise ValueError("class weights must be positive and finite")
    return w


def compute_class_weights(data: LabeledDataset, policy: str = "balanced") -> np.ndarray:
    """Per-class positive penalty.

    "balanced" sets w_c to the negative:positive ratio of the dataset, falling
    back to 1.0 for degenerate classes (no positives, or no negatives, where
    the ratio would vanish); "uniform" sets every weight to 1.
    """
    if policy == "uniform":
        return np.ones(data.num_classes)
    if policy != "balanced":
        raise ValueError(f"unknown class weight policy {policy!r}")
    pos = data.labels.sum(axis=0).astype(np.float64)
    neg = len(data) - pos
    return np.where((pos > 0) & (neg > 0), neg / np.maximum(pos, 1.0), 1.0)


def weighted_bce_loss(probs, labels, weights) -> float:
    """Class-weighted binary cross-entropy, summed over examples and classes.

    L = -sum_i sum_c [ w_c * y_ic * log f_ic + (1 - y_ic) * log(1 - f_ic) ],
    with probabilities clamped away from 0 and 1 before the logs.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    if probs.shape != labels.shape:
        raise ValueError(f"probs shape {probs.shape} != labels shape {labels.shape}")
    w = _as_class_weights(weights, probs.shape[1])
    f = clamp_probs(probs)
    return float(-np.sum(w * labels * np.log(f) + (1.0 - labels) * np.log1p(-f)))


def _bce_delta(logits: np.ndarray, labels: np.ndarray, w: np.ndarray) -> np.ndarray:
    """d(loss)/d(logits) of the weighted BCE; exact where probabilities are unclamped."""
    f = expit(logits)
    return (1.0 - labels) * f - w * labels * (1.0 - f)


def _backprop(model: Model, acts, dlogits):
    """Gradients w.r.t. every parameter given d(loss)/d(logits)."""
    num_layers = len(model.weights)
    grads_w = [None] * num_layers
    grads_b = [None] * num_layers
    delta = dlogits
    for l in range(num_layers - 1, -1, -1):
        grads_w[l] = acts[l].T @ delta
        grads_b[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ model.weights[l].T) * (1.0 - acts[l] ** 2)
    return grads_w, grads_b


def loss_gradients(model: Model, features, labels, weights):
    """Analytic gradients of weighted_bce_loss over a batch.

    Returns (grads_w, grads_b) lists mirroring model.weights / model.biases.
    """
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("cannot take gradients over an empty batch")
    w = _as_class_weights(weights, model.config.num_classes)
    acts, logits = _forward_cached(model, X)
    return _backprop(model, acts, _bce_delta(logits, Y, w))


def _mean_dev_auc(model: Model, dev: LabeledDataset) -> float:
    report = metrics.evaluate(model, dev)
    return metrics.mean_auc(report)


def _fit(model: Model, X: np.ndarray, Y: np.ndarray, params: TrainParams,
         delta_fn, loss_fn) -> Model:
    """Seeded shuffled mini-batch Adam over an arbitrary per-logit loss.

    ``delta_fn(logits, y_batch, idx)`` returns d(loss)/d(logits) and
    ``loss_fn(logits, y_batch, idx)`` the batch loss (non-finite values
    abort). Batch gradients are scaled by n/|batch| so each step targets
    the dataset-sum objective.
    """
    work = model.copy()
    n = X.shape[0]
    m_w = [np.zeros_like(w) for w in work.weights]
    v_w = [np.zeros_like(w) for w in work.weights]
    m_b = [np.zeros_like(b) for b in work.biases]
    v_b = [np.zeros_like(b) for b in work.biases]
    b1, b2, eps = params.adam_beta1, params.adam_beta2, params.adam_epsilon
    rng = np.random.default_rng(params.seed)
    stop = params.early_stop
    if stop is not None:
        _mean_dev_auc(work, stop.dev)  # fail fast if no event is evaluable
    best_auc, best_model, stall = np.inf, None, 0
    step = 0
    for epoch in range(params.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = perm[start:start + params.batch_size]
            acts, logits = _forward_cached(work, X[idx])
            loss = loss_fn(logits, Y[idx], idx)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training loss became non-finite at epoch {epoch}, step {step}; "
                    "try a lower learning rate")
            scale = n / idx.size
            grads_w, grads_b = _backprop(work, acts, delta_fn(logits, Y[idx], idx) * scale)
            step += 1
            c1 = 1.0 - b1 ** step
            c2 = 1.0 - b2 ** step
            for l in range(len(work.weights)):
                for p, g, m, v in ((work.weights[l], grads_w[l], m_w[l], v_w[l]),
                                   (work.biases[l], grads_b[l], m_b[l], v_b[l])):
                    m *= b1
                    m += (1.0 - b1) * g
                    v *= b2
                    v += (1.0 - b2) * g * g
                    p -= params.learning_rate * (m / c1) / (np.sqrt(v / c2) + eps)
        if stop is not None:
            auc = _mean_dev_auc(work, stop.dev)
            if auc < best_auc:
                best_auc, best_model, stall = auc, work.copy(), 0
            else:
                stall += 1
                if stall >= stop.patience:
                    break
    if stop is not None and best_model is not None:
        return best_model
    return work


def train(model: Model, data: LabeledDataset, weights, params: TrainParams) -> Model:
    """Mini-batch Adam on the weighted BCE objective; returns a new Model.

    Deterministic given (model, data, weights, params.seed). With
    params.early_stop set, the checkpoint with the lowest mean dev DET-AUC
    is returned instead of the last epoch's parameters.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if data.input_dim != model.config.input_dim:
        raise ValueError(f"dataset feature width {data.input_dim} != model input "
                         f"{model.config.input_dim}")
    if data.num_classes != model.config.num_classes:
        raise ValueError(f"dataset has {data.num_classes} classes, model expects "
                         f"{model.config.num_classes}")
    w = _as_class_weights(weights, model.config.num_classes)
    Y = data.labels.astype(np.float64)

    def delta_fn(logits, yb, idx):
        return _bce_delta(logits, yb, w)

    def loss_fn(logits, yb, idx):
        f = clamp_probs(expit(logits))
        return -np.sum(w * yb * np.log(f) + (1.0 - yb) * np.log1p(-f))

    return _fit(model, data.features, Y, params, delta_fn, loss_fn)


# ---------------------------------------------------------------------------
# checkpoint file: self-describing JSON, 64-bit floats via repr round-trip


def save_model(model: Model, path):
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config": {
            "input_dim": model.config.input_dim,
            "hidden_layers": list(model.config.hidden_layers),
            "num_classes": model.config.num_classes,
            "seed": model.config.seed,
        },
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_model(path) -> Model:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    cfg = payload["config"]
    config = ModelConfig(
        input_dim=cfg["input_dim"],
        hidden_layers=tuple(cfg["hidden_layers"]),
        num_classes=cfg["num_classes"],
        seed=cfg["seed"],
    )
    weights = [np.asarray(w, dtype=np.float64) for w in payload["weights"]]
    biases = [np.asarray(b, dtype=np.float64) for b in payload["biases"]]
    return Model(weights, biases, config)
