"""Per-sample baseline losses and the group-fairness penalty.

Losses operate on raw logits. Every loss comes with its analytic gradient
with respect to the logits, so the trainer never needs numeric
differentiation (finite differences exist only in the tests as the oracle).

Loss formulas (documented implementation decisions, defaults in LossSpec):
* ce          -log softmax(z)[y]
* ls / nls    cross-entropy against (1-alpha)*onehot + alpha/K; ls uses
              alpha in [0, 1), nls the same formula with alpha < 0
* focal       -(1 - p_y)^gamma * log p_y
* logit_adj   ce on z + tau * log(priors), the adjustment applied to every
              class logit
* peer        ce(z, y) - weight * ce(z_peer, y_peer) with the peer pair drawn
              by two independent uniform permutations per batch (trainer side)

The fairness penalty is
    sum_i lambda_i * | mean over group i of q  -  mean over scope of q |
where q is the model's predicted probability of each sample's noisy label
and the scope is the current batch (training) or the full corpus
(evaluation). Groups empty in the scope contribute 0, and the absolute
value's subgradient at 0 is taken as 0 so training stays deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LossSpec",
    "FrConfig",
    "softmax_probs",
    "log_softmax",
    "ce_loss",
    "ls_loss",
    "nls_loss",
    "focal_loss",
    "logit_adjusted_loss",
    "peer_loss",
    "per_sample_loss_and_grad",
    "fr_penalty",
    "fr_penalty_and_grad",
    "combined_objective",
]

LOSS_KINDS = ("ce", "ls", "nls", "focal", "logit_adj", "peer")


@dataclass(frozen=True)
class LossSpec:
    """Base-loss choice plus hyperparameters (unused ones are ignored)."""

    kind: str = "ce"
    alpha: float = 0.1          # ls smoothing; nls default is -0.2
    gamma: float = 2.0          # focal exponent
    tau: float = 1.0            # logit adjustment scale
    peer_weight: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"invalid hyperparameter: unknown loss kind {self.kind!r}")
        if self.kind == "ls" and not 0 <= self.alpha < 1:
            raise ValueError("invalid hyperparameter: ls needs alpha in [0, 1)")
        if self.kind == "nls" and not self.alpha < 0:
            raise ValueError("invalid hyperparameter: nls needs alpha < 0")
        if self.kind == "focal" and self.gamma < 0:
            raise ValueError("invalid hyperparameter: focal needs gamma >= 0")
        if self.kind == "logit_adj" and self.tau < 0:
            raise ValueError("invalid hyperparameter: logit_adj needs tau >= 0")
        if self.kind == "peer" and self.peer_weight < 0:
            raise ValueError("invalid hyperparameter: peer needs weight >= 0")


@dataclass(frozen=True)
class FrConfig:
    """Fairness penalty weights: one shared lambda or one per group."""

    lam: float | tuple = 0.0

    def __post_init__(self):
        lam = self.lam
        if np.ndim(lam) > 0:
            lam = tuple(float(v) for v in lam)
            object.__setattr__(self, "lam", lam)
            if any(v < 0 for v in lam):
                raise ValueError("lambda values must be >= 0")
        elif lam < 0:
            raise ValueError("lambda must be >= 0")

    def weight(self, group: int) -> float:
        if np.ndim(self.lam) > 0:
            return self.lam[group]
        return float(self.lam)

    @property
    def enabled(self) -> bool:
        if np.ndim(self.lam) > 0:
            return any(v > 0 for v in self.lam)
        return self.lam > 0


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_probs(logits) -> np.ndarray:
    """Max-shifted softmax; rows sum to 1 within 1e-12."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValueError("logits must be finite")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _onehot(labels: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], K))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def per_sample_loss_and_grad(spec: LossSpec, logits, labels, *, priors=None,
                             peer_logits=None, peer_labels=None):
    """Per-sample losses and gradients for a batch.

    Returns (losses (M,), grad (M, K), peer_grad) where peer_grad is the
    gradient with respect to ``peer_logits`` (None for every other loss).
    """
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    M, K = z.shape
    if y.shape[0] != M or (y.min(initial=0) < 0) or (y.max(initial=0) >= K):
        raise ValueError("labels out of range")
    rows = np.arange(M)

    if spec.kind in ("ce", "peer"):
        p = softmax_probs(z)
        logp = log_softmax(z)
        losses = -logp[rows, y]
        grad = p - _onehot(y, K)
        if spec.kind == "ce":
            return losses, grad, None
        if peer_logits is None or peer_labels is None:
            raise ValueError("peer loss needs peer logits and labels")
        pz = np.atleast_2d(np.asarray(peer_logits, dtype=np.float64))
        py = np.atleast_1d(np.asarray(peer_labels, dtype=np.int64))
        pp = softmax_probs(pz)
        plogp = log_softmax(pz)
        losses = losses - spec.peer_weight * (-plogp[np.arange(pz.shape[0]), py])
        peer_grad = -spec.peer_weight * (pp - _onehot(py, K))
        return losses, grad, peer_grad

    if spec.kind in ("ls", "nls"):
        target = (1.0 - spec.alpha) * _onehot(y, K) + spec.alpha / K
        logp = log_softmax(z)
        losses = -(target * logp).sum(axis=1)
        grad = softmax_probs(z) - target
        return losses, grad, None

    if spec.kind == "focal":
        p = softmax_probs(z)
        logp = log_softmax(z)
        py = p[rows, y]
        lpy = logp[rows, y]
        om = 1.0 - py
        losses = -np.power(om, spec.gamma) * lpy
        # dL/dp_y, with the subgradient at p_y = 1 taken as 0
        term = np.zeros(M)
        pos = om > 0
        term[pos] = (spec.gamma * np.power(om[pos], spec.gamma - 1.0) * lpy[pos]
                     - np.power(om[pos], spec.gamma) / py[pos])
        grad = term[:, None] * py[:, None] * (_onehot(y, K) - p)
        return losses, grad, None

    if spec.kind == "logit_adj":
        if priors is None:
            raise ValueError("logit_adj needs class priors")
        pri = np.asarray(priors, dtype=np.float64)
        if pri.shape != (K,) or (pri <= 0).any() or abs(pri.sum() - 1.0) > 1e-9:
            raise ValueError("invalid hyperparameter: priors must be positive and sum to 1")
        adjusted = z + spec.tau * np.log(pri)[None, :]
        logp = log_softmax(adjusted)
        losses = -logp[rows, y]
        grad = softmax_probs(adjusted) - _onehot(y, K)
        return losses, grad, None

    raise ValueError(f"invalid hyperparameter: unknown loss kind {spec.kind!r}")


def _scalar(spec: LossSpec, logits, label, **kw) -> float:
    losses, _, _ = per_sample_loss_and_grad(spec, np.asarray(logits)[None, :],
                                            np.asarray([label]), **kw)
    return float(losses[0])


def ce_loss(logits, label) -> float:
    return _scalar(LossSpec("ce"), logits, label)


def ls_loss(logits, label, alpha: float) -> float:
    return _scalar(LossSpec("ls", alpha=alpha), logits, label)


def nls_loss(logits, label, alpha: float) -> float:
    return _scalar(LossSpec("nls", alpha=alpha), logits, label)


def focal_loss(logits, label, gamma: float) -> float:
    return _scalar(LossSpec("focal", gamma=gamma), logits, label)


def logit_adjusted_loss(logits, label, priors, tau: float) -> float:
    return _scalar(LossSpec("logit_adj", tau=tau), logits, label, priors=priors)


def peer_loss(logits, label, peer_logits, peer_label, weight: float) -> float:
    return _scalar(LossSpec("peer", peer_weight=weight), logits, label,
                   peer_logits=np.asarray(peer_logits)[None, :],
                   peer_labels=np.asarray([peer_label]))


def fr_penalty(noisy_label_probs, group_ids, config: FrConfig) -> float:
    """Sum over groups of lambda_i * |group mean of q - overall mean of q|."""
    pen, _ = fr_penalty_and_grad(noisy_label_probs, group_ids, config)
    return pen


def fr_penalty_and_grad(noisy_label_probs, group_ids, config: FrConfig):
    """Penalty plus its gradient with respect to the per-sample probabilities."""
    q = np.asarray(noisy_label_probs, dtype=np.float64)
    g = np.asarray(group_ids, dtype=np.int64)
    if q.shape != g.shape or q.ndim != 1 or q.size == 0:
        raise ValueError("need matching nonempty probability and group vectors")
    M = q.shape[0]
    overall = q.mean()
    pen = 0.0
    grad = np.zeros(M)
    for group in np.unique(g):
        members = g == group
        m = members.sum()
        lam = config.weight(int(group))
        gap = q[members].mean() - overall
        pen += lam * abs(gap)
        s = np.sign(gap)  # subgradient 0 at a zero gap
        if lam != 0.0 and s != 0.0:
            grad += lam * s * (members / m - 1.0 / M)
    return float(pen), grad


def combined_objective(base_losses, noisy_label_probs, group_ids, config: FrConfig) -> float:
    """Mean base loss plus the fairness penalty over the same scope."""
    losses = np.asarray(base_losses, dtype=np.float64)
    return float(losses.mean()) + fr_penalty(noisy_label_probs, group_ids, config)
