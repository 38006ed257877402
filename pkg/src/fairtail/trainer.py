"""Deterministic mini-batch SGD for small softmax classifiers.

Models are a linear map or one tanh hidden layer. A run is a pure function
of (corpora, specs, config seed): shuffles, peer pairings and parameter
initialization all come from streams derived from the config seed, and every
reduction is a plain numpy sum, so repeated runs are bitwise identical.

The per-batch objective is mean base loss plus the fairness penalty over the
batch; groups empty in a batch contribute nothing. Epoch records hold the
running mean base loss over the epoch's batches (computed before each
update), the mean per-batch penalty, and end-of-epoch accuracies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_X_y

from .datamodel import GroupAssignment, LabeledCorpus
from .objectives import (
    FrConfig,
    LossSpec,
    fr_penalty_and_grad,
    per_sample_loss_and_grad,
    softmax_probs,
)
from .seeds import STREAM_PARAM_INIT, STREAM_PEER, STREAM_SHUFFLE, derive_rng

__all__ = [
    "ModelSpec",
    "TrainConfig",
    "EpochStats",
    "EvalResult",
    "FittedModel",
    "TrainReport",
    "TrainingDiverged",
    "train",
    "evaluate",
    "write_report",
    "save_params",
    "load_params",
    "SoftmaxClassifier",
]


class TrainingDiverged(RuntimeError):
    """Raised when a batch objective stops being finite."""


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "linear"        # "linear" | "one_hidden"
    input_dim: int = 1
    class_count: int = 2
    hidden_dim: int = 16

    def __post_init__(self):
        if self.kind not in ("linear", "one_hidden"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if min(self.input_dim, self.class_count) < 1 or (self.kind == "one_hidden" and self.hidden_dim < 1):
            raise ValueError("dimensions must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.1
    lr_decay_epochs: tuple = ()
    lr_decay_factor: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0
    loss: LossSpec = field(default_factory=LossSpec)
    fr: FrConfig = field(default_factory=FrConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0 or self.learning_rate <= 0:
            raise ValueError("need weight_decay >= 0 and learning_rate > 0")
        object.__setattr__(self, "lr_decay_epochs", tuple(self.lr_decay_epochs))


@dataclass(frozen=True)
class EpochStats:
    mean_base_loss: float
    fr_penalty: float
    train_accuracy: float
    eval_accuracy: float | None


@dataclass(frozen=True)
class EvalResult:
    overall_accuracy: float
    per_class_accuracy: np.ndarray
    per_group_accuracy: np.ndarray | None
    label_probabilities: np.ndarray


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    params: tuple

    def predict_logits(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if self.spec.kind == "linear":
            W, b = self.params
            return X @ W + b
        W1, b1, W2, b2 = self.params
        return np.tanh(X @ W1 + b1) @ W2 + b2

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_logits(X), axis=1)

    def decision_threshold(self) -> float:
        """Feature value where the two class logits tie (linear, 1-D, binary)."""
        if self.spec.kind != "linear" or self.spec.input_dim != 1 or self.spec.class_count != 2:
            raise ValueError("decision_threshold needs a linear 1-D binary model")
        W, b = self.params
        slope = W[0, 1] - W[0, 0]
        if slope == 0:
            raise ValueError("degenerate model: class logits are parallel")
        return float(-(b[1] - b[0]) / slope)


@dataclass(frozen=True)
class TrainReport:
    epochs: tuple
    final_eval: EvalResult
    best_epoch: int
    best_accuracy: float
    model: FittedModel


def _init_params(spec: ModelSpec, seed: int) -> list[np.ndarray]:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    rng = derive_rng(seed, STREAM_PARAM_INIT)
    def layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))
    if spec.kind == "linear":
        return [layer(spec.input_dim, spec.class_count), np.zeros(spec.class_count)]
    return [layer(spec.input_dim, spec.hidden_dim), np.zeros(spec.hidden_dim),
            layer(spec.hidden_dim, spec.class_count), np.zeros(spec.class_count)]


def _forward(spec: ModelSpec, params, X):
    if spec.kind == "linear":
        W, b = params
        return X @ W + b, None
    W1, b1, W2, b2 = params
    hidden = np.tanh(X @ W1 + b1)
    return hidden @ W2 + b2, hidden


def _backward(spec: ModelSpec, params, X, hidden, dZ):
    if spec.kind == "linear":
        return [X.T @ dZ, dZ.sum(axis=0)]
    W1, b1, W2, b2 = params
    dH = (dZ @ W2.T) * (1.0 - hidden ** 2)
    return [X.T @ dH, dH.sum(axis=0), hidden.T @ dZ, dZ.sum(axis=0)]


def _noisy_priors(labels: np.ndarray, K: int) -> np.ndarray:
    """Add-one smoothed class frequencies of the observed labels."""
    counts = np.bincount(labels, minlength=K)[:K]
    return (counts + 1.0) / (labels.shape[0] + K)


def train(corpus: LabeledCorpus, eval_corpus: LabeledCorpus | None,
          model: ModelSpec, config: TrainConfig) -> TrainReport:
    """SGD with momentum on the combined objective; see the module docstring.

    Batches come from a fresh seeded shuffle each epoch; the last short batch
    is kept. Evaluation runs at every epoch end on ``eval_corpus`` (clean
    labels); the best-epoch accuracy is the max over those evaluations.
    """
    if config.fr.enabled and corpus.groups is None:
        raise ValueError("missing group assignment: fairness penalty needs groups")
    if model.input_dim != corpus.d or model.class_count != corpus.class_count:
        raise ValueError("model spec does not match corpus dimensions")
    X_all = corpus.features
    y_all = corpus.noisy_labels
    gids = corpus.groups.group_ids if corpus.groups is not None else None
    priors = _noisy_priors(y_all, corpus.class_count) if config.loss.kind == "logit_adj" else None

    params = _init_params(model, config.seed)
    velocity = [np.zeros_like(p) for p in params]
    n = corpus.n
    epoch_stats = []
    best_epoch, best_accuracy = 0, -1.0
    final_model = FittedModel(model, tuple(p.copy() for p in params))

    for epoch in range(config.epochs):
        lr = config.learning_rate * config.lr_decay_factor ** sum(
            1 for e in config.lr_decay_epochs if epoch >= e)
        order = derive_rng(config.seed, STREAM_SHUFFLE, epoch).permutation(n)
        loss_sum = 0.0
        penalty_sum = 0.0
        n_batches = 0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            X, y = X_all[idx], y_all[idx]
            M = idx.shape[0]
            logits, hidden = _forward(model, params, X)

            peer_logits = peer_labels = None
            perm_feat = None
            if config.loss.kind == "peer":
                rng = derive_rng(config.seed, STREAM_PEER, epoch, batch_index)
                perm_feat = rng.permutation(M)
                perm_label = rng.permutation(M)
                peer_logits = logits[perm_feat]
                peer_labels = y[perm_label]
            losses, grad, peer_grad = per_sample_loss_and_grad(
                config.loss, logits, y, priors=priors,
                peer_logits=peer_logits, peer_labels=peer_labels)

            dZ = grad / M
            if peer_grad is not None:
                np.add.at(dZ, perm_feat, peer_grad / M)

            penalty = 0.0
            if config.fr.enabled:
                probs = softmax_probs(logits)
                q = probs[np.arange(M), y]
                penalty, dpen_dq = fr_penalty_and_grad(q, gids[idx], config.fr)
                onehot = np.zeros_like(probs)
                onehot[np.arange(M), y] = 1.0
                dZ = dZ + (dpen_dq * q)[:, None] * (onehot - probs)

            objective = losses.mean() + penalty
            if not np.isfinite(objective):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {batch_index}")
            loss_sum += float(losses.sum())
            penalty_sum += penalty
            n_batches += 1

            grads = _backward(model, params, X, hidden, dZ)
            for p, v, g in zip(params, velocity, grads):
                g = g + config.weight_decay * p
                v *= config.momentum
                v -= lr * g
                p += v

        final_model = FittedModel(model, tuple(p.copy() for p in params))
        train_logits, _ = _forward(model, params, X_all)
        train_acc = float(np.mean(np.argmax(train_logits, axis=1) == y_all))
        eval_acc = None
        if eval_corpus is not None:
            eval_acc = evaluate(final_model, eval_corpus).overall_accuracy
            if eval_acc > best_accuracy:
                best_epoch, best_accuracy = epoch, eval_acc
        epoch_stats.append(EpochStats(loss_sum / n, penalty_sum / n_batches, train_acc, eval_acc))

    if eval_corpus is not None:
        final_eval = evaluate(final_model, eval_corpus)
    else:
        fallback = corpus if corpus.clean_labels is not None else LabeledCorpus(
            X_all, y_all, corpus.class_count, y_all, corpus.groups)
        final_eval = evaluate(final_model, fallback)
        best_epoch, best_accuracy = len(epoch_stats) - 1, final_eval.overall_accuracy
    return TrainReport(tuple(epoch_stats), final_eval, best_epoch, best_accuracy, final_model)


def evaluate(model: FittedModel, corpus: LabeledCorpus) -> EvalResult:
    """Argmax accuracy (lowest index wins ties) plus per-sample label probability.

    Uses clean labels; per-group accuracies appear when the corpus carries an
    assignment. Empty classes or groups evaluate to nan.
    """
    if corpus.clean_labels is None:
        raise ValueError("evaluation needs clean labels")
    logits = model.predict_logits(corpus.features)
    pred = np.argmax(logits, axis=1)
    y = corpus.clean_labels
    correct = pred == y
    overall = float(correct.mean())
    per_class = np.full(corpus.class_count, np.nan)
    for c in range(corpus.class_count):
        members = y == c
        if members.any():
            per_class[c] = correct[members].mean()
    per_group = None
    if corpus.groups is not None:
        per_group = np.full(corpus.groups.group_count, np.nan)
        for g in range(corpus.groups.group_count):
            members = corpus.groups.group_ids == g
            if members.any():
                per_group[g] = correct[members].mean()
    probs = softmax_probs(logits)
    label_probs = probs[np.arange(corpus.n), y]
    return EvalResult(overall, per_class, per_group, label_probs)


def write_report(report: TrainReport, path) -> None:
    """JSON lines: one record per epoch, then one final summary record."""
    with open(path, "w") as fh:
        for i, ep in enumerate(report.epochs):
            fh.write(json.dumps({
                "epoch": i,
                "mean_base_loss": ep.mean_base_loss,
                "fr_penalty": ep.fr_penalty,
                "train_accuracy": ep.train_accuracy,
                "eval_accuracy": ep.eval_accuracy,
            }) + "\n")
        final = report.final_eval
        fh.write(json.dumps({
            "final": {
                "overall_accuracy": final.overall_accuracy,
                "per_class_accuracy": [None if np.isnan(v) else float(v)
                                       for v in final.per_class_accuracy],
                "per_group_accuracy": (None if final.per_group_accuracy is None else
                                       [None if np.isnan(v) else float(v)
                                        for v in final.per_group_accuracy]),
                "best_epoch": report.best_epoch,
                "best_accuracy": report.best_accuracy,
            }
        }) + "\n")


_PARAM_NAMES = {"linear": ("W", "b"), "one_hidden": ("W1", "b1", "W2", "b2")}


def save_params(model: FittedModel, path) -> None:
    """Text format: a header naming array shapes, then one value per line."""
    names = _PARAM_NAMES[model.spec.kind]
    header = " ".join(f"{name}:{'x'.join(str(s) for s in arr.shape)}"
                      for name, arr in zip(names, model.params))
    lines = [f"{model.spec.kind} {header}"]
    for arr in model.params:
        lines.extend(repr(float(v)) for v in arr.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path) -> FittedModel:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    kind = head[0]
    shapes = []
    for token in head[1:]:
        _, shape = token.split(":")
        shapes.append(tuple(int(s) for s in shape.split("x")))
    values = np.array([float(v) for v in lines[1:]])
    params, at = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        params.append(values[at:at + size].reshape(shape))
        at += size
    if kind == "linear":
        spec = ModelSpec("linear", shapes[0][0], shapes[0][1])
    else:
        spec = ModelSpec("one_hidden", shapes[0][0], shapes[2][1], shapes[0][1])
    return FittedModel(spec, tuple(params))


class SoftmaxClassifier(BaseEstimator, ClassifierMixin):
    """Estimator facade over :func:`train` for ecosystem composition.

    ``fit(X, y, groups=...)`` treats y as the (possibly noisy) training
    labels; pass ``groups`` to enable the fairness penalty with
    ``fr_lambda > 0``. The full per-epoch record lands in ``report_``.
    """

    def __init__(self, kind="linear", hidden_dim=16, epochs=30, batch_size=128,
                 learning_rate=0.1, lr_decay_epochs=(), lr_decay_factor=0.1,
                 momentum=0.9, weight_decay=5e-4, seed=0, loss="ce", alpha=0.1,
                 gamma=2.0, tau=1.0, peer_weight=1.0, fr_lambda=0.0):
        self.kind = kind
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay_epochs = lr_decay_epochs
        self.lr_decay_factor = lr_decay_factor
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.seed = seed
        self.loss = loss
        self.alpha = alpha
        self.gamma = gamma
        self.tau = tau
        self.peer_weight = peer_weight
        self.fr_lambda = fr_lambda

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        assignment = None
        if groups is not None:
            groups = np.asarray(groups, dtype=np.int64)
            assignment = GroupAssignment(groups, int(groups.max()) + 1)
        corpus = LabeledCorpus(X, encoded, len(self.classes_), encoded, assignment)
        spec = ModelSpec(self.kind, X.shape[1], len(self.classes_), self.hidden_dim)
        config = TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, lr_decay_epochs=tuple(self.lr_decay_epochs),
            lr_decay_factor=self.lr_decay_factor, momentum=self.momentum,
            weight_decay=self.weight_decay, seed=self.seed,
            loss=LossSpec(self.loss, alpha=self.alpha, gamma=self.gamma,
                          tau=self.tau, peer_weight=self.peer_weight),
            fr=FrConfig(self.fr_lambda),
        )
        self.report_ = train(corpus, None, spec, config)
        self.model_ = self.report_.model
        return self

    def predict_proba(self, X):
        X = check_array(X)
        return softmax_probs(self.model_.predict_logits(X))

    def predict(self, X):
        X = check_array(X)
        return self.classes_[self.model_.predict(X)]
