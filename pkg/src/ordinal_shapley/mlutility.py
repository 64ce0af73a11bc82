"""Order-sensitive classification utility.

A coalition ``(p_1, ..., p_L)`` of training points is priced by fitting a
softmax regression in which the point at slot ``i`` carries a Gaussian
positional weight, then scoring accuracy on a fixed evaluation slice.  Points
near the middle of the sequence therefore matter more than points at either
end, which is what makes the utility depend on order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .core import Coalition, OracleError, UtilityOracle, check_coalition


def position_weights(n: int) -> np.ndarray:
    """Gaussian sample weight per zero-based slot of an ``n``-long sequence.

    Centered at ``(n - 1) / 2`` with width ``(n - 1) / 6`` and scaled by
    ``n / (sqrt(2 pi) width)``.  A single slot gets weight 1.
    """
    if n < 1:
        raise ValueError("need at least one position")
    if n == 1:
        return np.ones(1)
    mu = (n - 1) / 2.0
    sigma = (n - 1) / 6.0
    i = np.arange(n, dtype=float)
    return n / (math.sqrt(2.0 * math.pi) * sigma) * np.exp(-((i - mu) ** 2) / (2.0 * sigma ** 2))


@dataclass(frozen=True)
class LogRegHyper:
    learning_rate: float = 0.1
    l2_penalty: float = 1e-4
    max_epochs: int = 500
    gradient_tolerance: float = 1e-6
    class_count: int = 2

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_epochs < 1 or self.gradient_tolerance <= 0:
            raise ValueError("learning_rate, max_epochs and gradient_tolerance must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")


@numba.njit(cache=True, nogil=True)
def _fit_softmax(X, y, w, n_classes, lr, l2, max_epochs, tol):  # pragma: no cover - jitted
    m, d = X.shape
    coef = np.zeros((d, n_classes))
    bias = np.zeros(n_classes)
    logits = np.empty(n_classes)
    resid = np.empty((m, n_classes))
    g_coef = np.empty((d, n_classes))
    g_bias = np.empty(n_classes)
    epochs = 0
    for epoch in range(max_epochs):
        for i in range(m):
            top = -np.inf
            for c in range(n_classes):
                z = bias[c]
                for f in range(d):
                    z += X[i, f] * coef[f, c]
                logits[c] = z
                if z > top:
                    top = z
            total = 0.0
            for c in range(n_classes):
                logits[c] = math.exp(logits[c] - top)
                total += logits[c]
            scale = w[i] / m
            for c in range(n_classes):
                target = 1.0 if y[i] == c else 0.0
                resid[i, c] = scale * (logits[c] / total - target)
        norm = 0.0
        for c in range(n_classes):
            acc = 0.0
            for i in range(m):
                acc += resid[i, c]
            g_bias[c] = acc
            norm += acc * acc
            for f in range(d):
                acc = l2 * coef[f, c]
                for i in range(m):
                    acc += X[i, f] * resid[i, c]
                g_coef[f, c] = acc
                norm += acc * acc
        if math.sqrt(norm) < tol:
            break
        for c in range(n_classes):
            bias[c] -= lr * g_bias[c]
            for f in range(d):
                coef[f, c] -= lr * g_coef[f, c]
        epochs = epoch + 1
    return coef, bias, epochs


@dataclass
class LogisticModel:
    """Per-class weight vectors and intercepts; a constant model if one class."""

    coef: np.ndarray
    intercept: np.ndarray
    epochs: int = 0
    constant_class: int | None = None

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, float) @ self.coef + self.intercept

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, float)
        if self.constant_class is not None:
            return np.full(len(X), self.constant_class, dtype=np.int64)
        return np.argmax(self.decision_function(X), axis=1)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        if len(y) == 0:
            raise ValueError("cannot score on an empty evaluation set")
        return float(np.mean(self.predict(X) == np.asarray(y)))


def train_weighted_logreg(X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray | None,
                          hyper: LogRegHyper) -> LogisticModel:
    """Fit softmax regression by full-batch gradient descent from zero.

    Each sample's cross-entropy term (and its gradient) is multiplied by its
    weight; the data term is averaged over the sample count.  Input with a
    single label yields a constant predictor.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need at least one training sample")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    w = np.ones(len(X)) if sample_weight is None else np.ascontiguousarray(sample_weight, float)
    if len(w) != len(X) or np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("sample weights must be finite and positive, one per sample")
    if y.min() < 0 or y.max() >= hyper.class_count:
        raise ValueError(f"labels must lie in [0, {hyper.class_count})")
    d, k = X.shape[1], hyper.class_count
    present = np.unique(y)
    if len(present) == 1:
        return LogisticModel(np.zeros((d, k)), np.zeros(k), 0, int(present[0]))
    coef, bias, epochs = _fit_softmax(X, y, w, k, hyper.learning_rate, hyper.l2_penalty,
                                      hyper.max_epochs, hyper.gradient_tolerance)
    return LogisticModel(coef, bias, int(epochs))


class MlUtilityOracle(UtilityOracle):
    """Held-out accuracy of a classifier trained on an ordered coalition.

    ``X``/``y`` are the points being valued (players are row indices);
    ``X_eval``/``y_eval`` score the fitted model.  The classifier is refit
    from scratch on every call.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, X_eval: np.ndarray, y_eval: np.ndarray,
                 hyper: LogRegHyper | None = None, empty_value: float = 0.0):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.X_eval = np.asarray(X_eval, dtype=np.float64)
        self.y_eval = np.asarray(y_eval, dtype=np.int64)
        if len(self.X) != len(self.y) or len(self.X_eval) != len(self.y_eval):
            raise ValueError("feature and label lengths differ")
        if len(self.y_eval) == 0:
            raise ValueError("evaluation slice is empty")
        n_classes = int(max(self.y.max(initial=0), self.y_eval.max(initial=0))) + 1
        self.hyper = hyper or LogRegHyper(class_count=max(2, n_classes))
        self.n_players = len(self.X)
        self.empty_value = float(empty_value)

    def fit(self, seq: Sequence[int]) -> LogisticModel:
        idx = np.asarray(check_coalition(seq, self.n_players), dtype=np.int64)
        return train_weighted_logreg(self.X[idx], self.y[idx], position_weights(len(idx)),
                                     self.hyper)

    def evaluate(self, seq: Coalition) -> float:
        try:
            model = self.fit(seq)
        except ValueError as exc:
            raise OracleError(f"training failed on a coalition of {len(seq)} points: {exc}") from exc
        return model.accuracy(self.X_eval, self.y_eval)


def evaluate_utility(oracle: UtilityOracle, seq: Sequence[int]) -> float:
    return oracle(tuple(seq))
