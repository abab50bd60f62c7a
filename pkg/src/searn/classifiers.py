"""Cost-sensitive multiclass learners used as base classifiers.

Two model families: multinomial naive Bayes and multiclass logistic
regression with a Gaussian (L2) prior.  Cost vectors are bridged to these
standard trainers by :func:`costs_to_weighted_labels`, which converts a
per-action regret vector into one or more weighted labeled examples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .errors import ConfigError, OptimizerError, TrainingError
from .features import FeatureVector


class LabeledExample(NamedTuple):
    """One weighted multiclass training point."""

    features: FeatureVector
    label: int
    weight: float


def costs_to_weighted_labels(example, mode: str) -> "list[LabeledExample]":
    """Convert a cost-sensitive example into weighted labeled examples.

    ``argmin_spread`` emits the single cheapest action, weighted by the
    largest regret in the vector (ties broken toward the lowest action id).
    ``softmin`` emits every action with weight proportional to exp(-cost),
    normalized to sum to one.  Costs are assumed to be regrets already
    (minimum subtracted); softmin is invariant to that shift anyway.  The
    example's own weight multiplies the emitted weights.
    """
    costs = np.asarray(example.costs, dtype=float)
    actions = list(example.actions)
    base = float(getattr(example, "weight", 1.0))
    if costs.size != len(actions):
        raise ConfigError("cost vector length does not match action list")
    if np.all(costs == costs[0]):
        raise TrainingError(
            "constant cost vector reached the reduction; it should have been "
            "filtered during example generation"
        )
    if mode == "argmin_spread":
        best = int(np.argmin(costs))
        spread = float(np.max(costs) - np.min(costs))
        return [LabeledExample(example.features, actions[best], base * spread)]
    if mode == "softmin":
        w = np.exp(-(costs - costs.min()))
        w /= w.sum()
        return [LabeledExample(example.features, a, base * float(wk))
                for a, wk in zip(actions, w)]
    raise ConfigError(f"unknown cost-to-weight mode: {mode!r}")


# ---------------------------------------------------------------------------
# Multinomial naive Bayes


@dataclass
class NBModel:
    """Multinomial naive Bayes over nonnegative count features.

    ``class_log_prior`` has one entry per class; ``feature_log_prob`` is a
    (classes x features) table.  Each exponentiated row sums to one.
    """

    class_log_prior: np.ndarray
    feature_log_prob: np.ndarray
    smoothing: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_classes(self) -> int:
        return self.class_log_prior.shape[0]

    def predict_costs(self, fv: FeatureVector) -> np.ndarray:
        cached = self._cache.get(fv)
        if cached is None:
            cached = nb_predict_costs(self, fv)
            self._cache[fv] = cached
        return cached

    def to_dict(self) -> dict:
        return {
            "type": "nb",
            "class_log_prior": self.class_log_prior.tolist(),
            "feature_log_prob": self.feature_log_prob.tolist(),
            "smoothing": self.smoothing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NBModel":
        return cls(
            class_log_prior=np.asarray(d["class_log_prior"], dtype=float),
            feature_log_prob=np.asarray(d["feature_log_prob"], dtype=float),
            smoothing=float(d["smoothing"]),
        )


def nb_train(examples, n_classes: int, n_features: int, smoothing: float) -> NBModel:
    """Estimate a multinomial naive Bayes model from weighted labeled data.

    Class priors are proportional to total weight per class; per-class
    feature probabilities are proportional to weighted feature counts plus
    ``smoothing``.  With zero smoothing a class that received no weight is
    an error, since its distributions would be undefined.
    """
    if smoothing < 0:
        raise ConfigError("smoothing must be nonnegative")
    class_weight = np.zeros(n_classes)
    counts = np.zeros((n_classes, n_features))
    for ex in examples:
        if ex.weight < 0:
            raise ConfigError("example weights must be nonnegative")
        if not 0 <= ex.label < n_classes:
            raise ConfigError(f"label {ex.label} outside [0, {n_classes})")
        class_weight[ex.label] += ex.weight
        for fid, v in zip(ex.features.ids, ex.features.values):
            if v < 0:
                raise ConfigError("naive Bayes requires nonnegative feature values")
            counts[ex.label, fid] += ex.weight * v
    if smoothing == 0.0 and np.any(class_weight == 0.0):
        empty = int(np.argmin(class_weight))
        raise TrainingError(
            f"class {empty} received zero weight and smoothing is zero"
        )
    prior = class_weight + smoothing
    prior /= prior.sum()
    table = counts + smoothing
    row_sums = table.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.where(row_sums > 0, table / row_sums, 1.0 / max(n_features, 1))
        class_log_prior = np.log(prior)
        feature_log_prob = np.log(table)
    return NBModel(class_log_prior, feature_log_prob, smoothing)


def nb_predict_costs(model: NBModel, fv: FeatureVector) -> np.ndarray:
    """Negative per-class log joint scores, minimum subtracted.

    The softmin of the returned vector is exactly the class posterior.
    Feature ids unseen at training time are ignored.
    """
    scores = model.class_log_prior.copy()
    n_feat = model.feature_log_prob.shape[1]
    for fid, v in zip(fv.ids, fv.values):
        if fid < n_feat:
            scores += v * model.feature_log_prob[:, fid]
    costs = -scores
    return costs - costs.min()


# ---------------------------------------------------------------------------
# Multiclass logistic regression


@dataclass
class LROptimizerConfig:
    """Deterministic full-batch gradient descent with backtracking."""

    max_epochs: int = 500
    grad_tol: float = 1e-6
    initial_step: float = 1.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-20


@dataclass
class LRModel:
    """Multiclass logistic regression with Gaussian prior variance sigma^2."""

    weights: np.ndarray
    l2_variance: float
    trained_epochs: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def predict_costs(self, fv: FeatureVector) -> np.ndarray:
        cached = self._cache.get(fv)
        if cached is None:
            cached = lr_predict_costs(self, fv)
            self._cache[fv] = cached
        return cached

    def to_dict(self) -> dict:
        return {
            "type": "lr",
            "weights": self.weights.tolist(),
            "l2_variance": self.l2_variance,
            "trained_epochs": self.trained_epochs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LRModel":
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            l2_variance=float(d["l2_variance"]),
            trained_epochs=int(d["trained_epochs"]),
        )


def _sparse_design(examples, n_features: int):
    data, indices, indptr = [], [], [0]
    labels, weights = [], []
    for ex in examples:
        data.extend(ex.features.values)
        indices.extend(ex.features.ids)
        indptr.append(len(indices))
        labels.append(ex.label)
        weights.append(ex.weight)
    X = sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), n_features),
    )
    return X, np.asarray(labels, dtype=np.int64), np.asarray(weights, dtype=float)


def _lr_objective_probs(X, y, w, l2_variance, W):
    """Objective value and softmax probabilities at W."""
    n = X.shape[0]
    n_classes = W.shape[0]
    logits = X @ W.T if n else np.zeros((0, n_classes))
    lse = logsumexp(logits, axis=1) if n else np.zeros(0)
    data_loss = float(np.dot(w, lse - logits[np.arange(n), y])) if n else 0.0
    penalty = float(np.sum(W * W)) / (2.0 * l2_variance)
    probs = np.exp(logits - lse[:, None]) if n else logits
    return data_loss + penalty, probs


def _lr_gradient(X, y, w, l2_variance, W, P):
    n = X.shape[0]
    rows = P.copy()
    if n:
        rows[np.arange(n), y] -= 1.0
        rows *= w[:, None]
    return (X.T @ rows).T + W / l2_variance


def lr_objective_grad(examples, n_classes, n_features, l2_variance, weights):
    """Objective and analytic gradient at an arbitrary weight matrix.

    Exposed so the gradient can be checked against finite differences.
    """
    X, y, w = _sparse_design(examples, n_features)
    W = np.asarray(weights, dtype=float).reshape(n_classes, n_features)
    f, P = _lr_objective_probs(X, y, w, l2_variance, W)
    return f, _lr_gradient(X, y, w, l2_variance, W, P)


def lr_train(
    examples,
    n_classes: int,
    n_features: int,
    l2_variance: float,
    config: LROptimizerConfig | None = None,
) -> LRModel:
    """Minimize weighted multiclass log loss plus ||W||^2 / (2 sigma^2).

    Full-batch gradient descent with a backtracking (Armijo) line search;
    fully deterministic given the data.  Stops at the gradient tolerance or
    the epoch cap, whichever comes first.
    """
    if l2_variance <= 0:
        raise ConfigError("l2_variance must be positive")
    cfg = config or LROptimizerConfig()
    examples = list(examples)
    X, y, w = _sparse_design(examples, n_features)
    W = np.zeros((n_classes, n_features))
    f, P = _lr_objective_probs(X, y, w, l2_variance, W)
    if not np.isfinite(f):
        raise OptimizerError("objective non-finite at initialization")
    step = cfg.initial_step
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        grad = _lr_gradient(X, y, w, l2_variance, W, P)
        gnorm2 = float(np.sum(grad * grad))
        if np.max(np.abs(grad)) < cfg.grad_tol:
            epoch -= 1
            break
        step = min(step * 2.0, 1e6)
        accepted = False
        while step >= cfg.min_step:
            W_try = W - step * grad
            f_try, P_try = _lr_objective_probs(X, y, w, l2_variance, W_try)
            if np.isfinite(f_try) and f_try <= f - cfg.armijo * step * gnorm2:
                W, f, P = W_try, f_try, P_try
                accepted = True
                break
            if not np.isfinite(f_try) and step <= cfg.min_step * 2:
                raise OptimizerError(f"loss became non-finite at step size {step:g}")
            step *= cfg.backtrack
        if not accepted:
            break
    return LRModel(weights=W, l2_variance=l2_variance, trained_epochs=epoch)


def lr_predict_costs(model: LRModel, fv: FeatureVector) -> np.ndarray:
    """Negative class log-probabilities under the softmax, min subtracted.

    Equals max(logits) - logits, so the cheapest action is the argmax logit.
    """
    logits = np.zeros(model.n_classes)
    n_feat = model.weights.shape[1]
    for fid, v in zip(fv.ids, fv.values):
        if fid < n_feat:
            logits += v * model.weights[:, fid]
    return logits.max() - logits
