"""Feed-forward network D -> 1024 -> 1024 -> C with softmax output.

Trained with minibatch SGD (classic momentum, L2 weight decay) on
cross-entropy, with inverted dropout on both hidden layers. Inputs are
standardized with the training mean/std, which are stored in the model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, DivergedLoss, ValidationError
from .data import FrameDataset, cap_frames

log = logging.getLogger(__name__)

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class MlpHyper:
    lr: float = 1e-4
    batch: int = 500
    momentum: float = 0.9
    weight_decay: float = 1e-6
    dropout: float = 0.5
    epochs: int = 50
    hidden: tuple = (1024, 1024)
    max_frames_per_video: int | None = None
    dtype: str = "float32"

    def validate(self):
        if self.lr <= 0 or self.batch < 1 or self.epochs < 1:
            raise ValidationError("lr, batch and epochs must be positive")
        if not 0 <= self.dropout < 1 or not 0 <= self.momentum < 1 or self.weight_decay < 0:
            raise ValidationError("dropout and momentum must lie in [0, 1); weight_decay >= 0")
        if not self.hidden or min(self.hidden) < 1:
            raise ValidationError("hidden widths must be positive")
        return self


@dataclass
class MlpModel:
    weights: list  # [(D, H1), (H1, H2), (H2, C)]
    biases: list
    classes: tuple
    mean: np.ndarray
    std: np.ndarray
    seed: int = 0
    activation: str = "relu"
    feature_kind: str = "statistical"
    history: list = field(default_factory=list)  # per-epoch mean training loss
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    n_train_rows: int = 0

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]


def init_params(sizes, rng, dtype=np.float64):
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return weights, biases


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(weights, biases, X, masks=None):
    """Returns (probabilities, cache). ``masks`` are pre-scaled dropout masks per hidden layer."""
    acts = [X]
    h = X
    for i, (w, b) in enumerate(zip(weights[:-1], biases[:-1])):
        h = np.maximum(h @ w + b, 0.0)
        if masks is not None:
            h = h * masks[i]
        acts.append(h)
    probs = softmax(h @ weights[-1] + biases[-1])
    return probs, acts


def loss_and_grads(weights, biases, X, Y, weight_decay=0.0, masks=None):
    """Mean cross-entropy plus 0.5 * weight_decay * sum ||W||^2, and its gradients.

    ``Y`` is one-hot (N, C).
    """
    n = X.shape[0]
    probs, acts = forward(weights, biases, X, masks)
    tiny = np.finfo(probs.dtype).tiny
    loss = -np.sum(Y * np.log(np.maximum(probs, tiny))) / n
    loss += 0.5 * weight_decay * sum(float(np.sum(w * w)) for w in weights)
    gw = [None] * len(weights)
    gb = [None] * len(biases)
    delta = (probs - Y) / n
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta + weight_decay * weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            # acts[i] > 0 is relu'(z); dropped units are already zero there
            delta = delta @ weights[i].T
            if masks is not None:
                delta = delta * masks[i - 1]
            delta = delta * (acts[i] > 0)
    return loss, gw, gb


def _standardize(X, mean, std):
    return (X - mean) / std


def train_mlp(data: FrameDataset, hyper: MlpHyper = MlpHyper(), seed: int = 0) -> MlpModel:
    hyper.validate()
    data = cap_frames(data, hyper.max_frames_per_video, seed)
    dtype = np.dtype(hyper.dtype)
    n_classes = len(data.classes)
    if len(np.unique(data.y)) < 2:
        raise ValidationError("MLP training needs at least two classes")
    mean = data.X.mean(axis=0)
    std = data.X.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    X = _standardize(data.X, mean, std).astype(dtype)
    Y = np.eye(n_classes, dtype=dtype)[data.y]
    n = X.shape[0]
    batch = min(hyper.batch, n)

    ss = np.random.SeedSequence(seed)
    init_rng, shuffle_rng, drop_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    sizes = (X.shape[1], *hyper.hidden, n_classes)
    weights, biases = init_params(sizes, init_rng, dtype)
    vw = [np.zeros_like(w) for w in weights]
    vb = [np.zeros_like(b) for b in biases]
    keep = 1.0 - hyper.dropout
    lr = dtype.type(hyper.lr)
    mu = dtype.type(hyper.momentum)

    def full_loss():
        return float(loss_and_grads(weights, biases, X, Y, 0.0)[0])

    initial = full_loss()
    history = []
    for epoch in range(hyper.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            masks = None
            if hyper.dropout > 0:
                masks = [
                    ((drop_rng.random((len(idx), h)) < keep) / keep).astype(dtype) for h in hyper.hidden
                ]
            loss, gw, gb = loss_and_grads(weights, biases, X[idx], Y[idx], hyper.weight_decay, masks)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}, batch starting {start}")
            for i in range(len(weights)):
                vw[i] = mu * vw[i] - lr * gw[i]
                vb[i] = mu * vb[i] - lr * gb[i]
                weights[i] += vw[i]
                biases[i] += vb[i]
            total += loss * len(idx)
        history.append(total / n)
        log.debug("epoch %d loss %.5f", epoch, history[-1])
    final = full_loss()
    if not np.isfinite(final):
        raise DivergedLoss("non-finite loss after training")
    return MlpModel(
        [w.astype(np.float64) for w in weights],
        [b.astype(np.float64) for b in biases],
        data.classes, mean, std, seed, "relu", data.feature_kind, history, initial, final, n,
    )


def predict_mlp(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"rows have width {X.shape[-1]}, network expects {model.n_features}")
    probs, _ = forward(model.weights, model.biases, _standardize(X, model.mean, model.std))
    return probs
