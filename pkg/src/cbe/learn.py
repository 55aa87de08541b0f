"""Small binary classifiers: logistic regression, a one-hidden-layer network
and k-nearest neighbours.

The two gradient-trained models use full-batch gradient descent on mean
cross-entropy plus an L2 penalty. A step that raises the loss is undone and
the learning rate halved; after ``max_halvings`` such events training stops.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cbe.errors import DimensionMismatch, NonFiniteFeatures, SingleClass

FORMAT_VERSION = 1


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DimensionMismatch("features and labels disagree on row count")
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.labels))]
        if len(self.ids) != len(self.labels):
            raise DimensionMismatch("ids and labels disagree on row count")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, rows) -> Dataset:
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows], [self.ids[i] for i in rows])


def _check_trainable(ds: Dataset) -> None:
    if len(ds) < 2 or len(np.unique(ds.labels)) < 2:
        raise SingleClass("training data needs both classes and at least two rows")
    if not np.isfinite(ds.features).all():
        raise NonFiniteFeatures("features contain NaN or Inf")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def _bce(z: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy from logits, computed stably."""
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


# logistic regression


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    l2: float = 0.0

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias

    def scores(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(x))


def logreg_loss_and_grad(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy + (l2/2)|w|^2 and its gradient (grad_w, grad_b)."""
    z = x @ w + b
    loss = _bce(z, y) + 0.5 * l2 * float(w @ w)
    r = (_sigmoid(z) - y) / len(y)
    return loss, x.T @ r + l2 * w, float(r.sum())


def train_logreg(
    ds: Dataset, l2: float = 1e-2, lr: float = 0.5, epochs: int = 500, seed: int = 0, max_halvings: int = 10
) -> LogRegModel:
    """Fit logistic regression from a zero start by full-batch gradient descent.

    The step size halves whenever a step would raise the loss; after
    ``max_halvings`` halvings training stops early.

    ``seed`` is accepted for interface symmetry; zero initialization makes
    training deterministic regardless.
    """
    del seed
    _check_trainable(ds)
    x, y = ds.features, ds.labels.astype(float)
    w, b = np.zeros(x.shape[1]), 0.0
    loss, gw, gb = logreg_loss_and_grad(w, b, x, y, l2)
    halvings = 0
    for _ in range(epochs):
        # the penalty is applied as an implicit shrink, stable for any l2
        w_new = (w - lr * (gw - l2 * w)) / (1.0 + lr * l2)
        b_new = b - lr * gb
        new_loss, ngw, ngb = logreg_loss_and_grad(w_new, b_new, x, y, l2)
        if new_loss > loss:
            halvings += 1
            if halvings > max_halvings:
                break
            lr /= 2.0
            continue
        w, b, loss, gw, gb = w_new, b_new, new_loss, ngw, ngb
    return LogRegModel(w, b, l2)


# one-hidden-layer network


@dataclass
class MlpModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    l2: float = 0.0

    @property
    def n_features(self) -> int:
        return self.w1.shape[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return (h @ self.w2).ravel() + self.b2

    def scores(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(x))

    def params(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2]


def mlp_loss_and_grad(params, x: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Loss and backprop gradients for ``params = [w1, b1, w2, b2]``.

    The penalty (l2/2)(|w1|^2 + |w2|^2) leaves the biases alone.
    """
    w1, b1, w2, b2 = params
    pre = x @ w1 + b1
    h = np.maximum(pre, 0.0)
    z = (h @ w2).ravel() + b2
    loss = _bce(z, y) + 0.5 * l2 * (float(np.sum(w1 * w1)) + float(np.sum(w2 * w2)))
    r = ((_sigmoid(z) - y) / len(y))[:, None]
    gw2 = h.T @ r + l2 * w2
    gb2 = float(r.sum())
    dh = (r @ w2.T) * (pre > 0)
    gw1 = x.T @ dh + l2 * w1
    gb1 = dh.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2]


def init_mlp(d: int, hidden: int, seed: int) -> MlpModel:
    if hidden < 1:
        raise ValueError("hidden layer width must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (d + hidden))
    lim2 = np.sqrt(6.0 / (hidden + 1))
    return MlpModel(
        rng.uniform(-lim1, lim1, size=(d, hidden)),
        np.zeros(hidden),
        rng.uniform(-lim2, lim2, size=(hidden, 1)),
        0.0,
    )


def train_mlp(
    ds: Dataset,
    hidden: int = 16,
    lr: float = 0.5,
    epochs: int = 1000,
    seed: int = 0,
    l2: float = 0.0,
    max_halvings: int = 10,
) -> MlpModel:
    if hidden < 1:
        raise ValueError("hidden layer width must be >= 1")
    _check_trainable(ds)
    x, y = ds.features, ds.labels.astype(float)
    model = init_mlp(x.shape[1], hidden, seed)
    params = model.params()
    loss, grads = mlp_loss_and_grad(params, x, y, l2)
    halvings = 0
    for _ in range(epochs):
        cand = [p - lr * g for p, g in zip(params, grads)]
        for i in (0, 2):
            cand[i] = (params[i] - lr * (grads[i] - l2 * params[i])) / (1.0 + lr * l2)
        new_loss, new_grads = mlp_loss_and_grad(cand, x, y, l2)
        if new_loss > loss:
            halvings += 1
            if halvings > max_halvings:
                break
            lr /= 2.0
            continue
        params, loss, grads = cand, new_loss, new_grads
    w1, b1, w2, b2 = params
    return MlpModel(w1, b1, w2, float(b2), l2)


# k-nearest neighbours


@dataclass
class KnnModel:
    features: np.ndarray
    labels: np.ndarray
    k: int = 5
    metric: str = "euclidean"

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError("k must be a positive odd integer")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown metric {self.metric!r}")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def _distances(self, x: np.ndarray) -> np.ndarray:
        if self.metric == "cosine":
            a = _unit_rows(x)
            b = _unit_rows(self.features)
            return 1.0 - a @ b.T
        sq = (x * x).sum(1)[:, None] - 2.0 * x @ self.features.T + (self.features * self.features).sum(1)[None, :]
        return np.maximum(sq, 0.0)

    def scores(self, x: np.ndarray) -> np.ndarray:
        k = min(self.k, len(self.labels))
        d = self._distances(x)
        # stable sort: equal distances resolve by training-row order
        nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
        return self.labels[nearest].mean(axis=1)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(n > 0, n, 1.0)


def train_knn(ds: Dataset, k: int = 5, metric: str = "euclidean") -> KnnModel:
    _check_trainable(ds)
    return KnnModel(ds.features.copy(), ds.labels.copy(), k, metric)


Model = LogRegModel | MlpModel | KnnModel


def predict(model: Model, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, scores); a label is 1 exactly when its score is >= 0.5."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got shape {x.shape}")
    s = model.scores(x)
    return (s >= 0.5).astype(int), s


MODEL_FAMILIES = ("logreg", "mlp", "knn")


def train_model(family: str, ds: Dataset, seed: int = 0, **params) -> Model:
    if family == "logreg":
        return train_logreg(ds, seed=seed, **params)
    if family == "mlp":
        return train_mlp(ds, seed=seed, **params)
    if family == "knn":
        return train_knn(ds, **params)
    raise ValueError(f"unknown model family {family!r}")


# serialization


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def save_model(model: Model, path: str | Path) -> None:
    """Write a versioned plain-text parameter dump.

    Line one is ``cbe-model <version> <kind>``; each following line is
    ``<name> <shape> <values...>`` with the shape written as ``r,c`` or ``n``.
    """
    kind = {LogRegModel: "logreg", MlpModel: "mlp", KnnModel: "knn"}[type(model)]
    if kind == "logreg":
        fields = {"weights": model.weights, "bias": np.array([model.bias]), "l2": np.array([model.l2])}
    elif kind == "mlp":
        fields = {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": np.array([model.b2]), "l2": np.array([model.l2])}
    else:
        fields = {"features": model.features, "labels": model.labels, "k": np.array([model.k])}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"cbe-model {FORMAT_VERSION} {kind}\n")
        if kind == "knn":
            fh.write(f"metric {model.metric}\n")
        for name, arr in fields.items():
            arr = np.asarray(arr)
            shape = ",".join(str(s) for s in arr.shape) or "1"
            fh.write(f"{name} {shape} {_fmt(arr)}\n")


def load_model(path: str | Path) -> Model:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 3 or head[0] != "cbe-model":
            raise ValueError(f"{path}: not a model file")
        if int(head[1]) != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {head[1]}")
        kind = head[2]
        vals: dict[str, np.ndarray] = {}
        metric = "euclidean"
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "metric":
                metric = parts[1]
                continue
            shape = tuple(int(s) for s in parts[1].split(","))
            vals[parts[0]] = np.array([float(v) for v in parts[2:]]).reshape(shape)
    if kind == "logreg":
        return LogRegModel(vals["weights"], float(vals["bias"][0]), float(vals["l2"][0]))
    if kind == "mlp":
        return MlpModel(vals["w1"], vals["b1"], vals["w2"], float(vals["b2"][0]), float(vals["l2"][0]))
    if kind == "knn":
        return KnnModel(vals["features"], vals["labels"].astype(int), int(vals["k"][0]), metric)
    raise ValueError(f"{path}: unknown model kind {kind!r}")


def write_predictions(path: str | Path, rows: Sequence[tuple[str, str, float, int]]) -> None:
    """TSV with columns id, task, score, label."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\ttask\tscore\tlabel\n")
        for pid, task, score, label in rows:
            fh.write(f"{pid}\t{task}\t{float(score)!r}\t{int(label)}\n")
