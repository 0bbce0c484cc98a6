"""Differentiable binary classifiers behind one small contract.

Two kinds: ``logistic`` (affine margin) and ``mlp`` (one tanh hidden layer).
Everything downstream consumes only margins, log-probabilities, and gradients
of weighted log-likelihoods, so the two kinds are interchangeable.

Weight layout is a single flat vector:

* logistic: ``[w_1 .. w_D, bias]``
* mlp:      ``[W1 (H*D, row-major), b1 (H), w2 (H), b2]``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .optimize import AscentResult, ascend

__all__ = [
    "KINDS",
    "ClassifierParams",
    "num_weights",
    "init_classifier",
    "predict_prob",
    "predict_prob_batch",
    "log_prob_batch",
    "log_prob_and_grad",
    "weighted_log_prob",
    "weighted_grad",
    "weight_log_prior",
    "fit_weighted",
]

KINDS = ("logistic", "mlp")


def num_weights(kind: str, num_features: int, hidden: int) -> int:
    if kind == "logistic":
        return num_features + 1
    if kind == "mlp":
        return hidden * (num_features + 2) + 1
    raise ValueError(f"unknown classifier kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ClassifierParams:
    """Flat weight vector plus the shape needed to interpret it."""

    kind: str
    num_features: int
    hidden: int
    weights: np.ndarray
    prior_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.num_features < 1:
            raise ValueError(f"num_features must be >= 1, got {self.num_features}")
        if self.kind == "mlp" and self.hidden < 1:
            raise ValueError(f"mlp needs hidden >= 1, got {self.hidden}")
        if self.kind == "logistic" and self.hidden != 0:
            raise ValueError("logistic classifier must have hidden=0")
        if not self.prior_variance > 0:
            raise ValueError(f"prior_variance must be positive, got {self.prior_variance}")
        weights = np.asarray(self.weights, dtype=np.float64)
        expected = num_weights(self.kind, self.num_features, self.hidden)
        if weights.shape != (expected,):
            raise ValueError(
                f"{self.kind} with D={self.num_features}, H={self.hidden} needs "
                f"{expected} weights, got shape {weights.shape}"
            )
        if not np.all(np.isfinite(weights)):
            raise ValueError("classifier weights must be finite")
        weights = weights.copy()
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    def with_weights(self, weights: np.ndarray) -> "ClassifierParams":
        return replace(self, weights=weights)


def init_classifier(
    kind: str,
    num_features: int,
    hidden: int = 8,
    prior_variance: float = 1.0,
    seed: int = 0,
) -> ClassifierParams:
    """Default init: logistic at zero, mlp from seeded uniform(-0.1, 0.1)."""
    if kind == "logistic":
        return ClassifierParams(kind, num_features, 0, np.zeros(num_features + 1), prior_variance)
    n = num_weights(kind, num_features, hidden)
    rng = np.random.default_rng(seed)
    return ClassifierParams(kind, num_features, hidden, rng.uniform(-0.1, 0.1, n), prior_variance)


def _check_features(params: ClassifierParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.num_features:
        raise ValueError(
            f"features must be (n, {params.num_features}), got shape {X.shape}"
        )
    return X


def _mlp_parts(params: ClassifierParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    D, H = params.num_features, params.hidden
    w = params.weights
    W1 = w[: H * D].reshape(H, D)
    b1 = w[H * D : H * D + H]
    w2 = w[H * D + H : H * D + 2 * H]
    b2 = w[-1]
    return W1, b1, w2, b2


def margins(params: ClassifierParams, X: np.ndarray) -> np.ndarray:
    """Pre-sigmoid decision values, shape (n,)."""
    X = _check_features(params, X)
    if params.kind == "logistic":
        return X @ params.weights[:-1] + params.weights[-1]
    W1, b1, w2, b2 = _mlp_parts(params)
    return np.tanh(X @ W1.T + b1) @ w2 + b2


def _sigmoid(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m, dtype=np.float64)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def predict_prob_batch(params: ClassifierParams, X: np.ndarray) -> np.ndarray:
    """p(y=1 | x) for each row of X."""
    return _sigmoid(margins(params, X))


def predict_prob(params: ClassifierParams, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(predict_prob_batch(params, x[None, :])[0])


def log_prob_batch(params: ClassifierParams, X: np.ndarray) -> np.ndarray:
    """(n, 2) array of [log p(y=0|x), log p(y=1|x)] per row.

    Uses the stable branch of log-sigmoid, so margins of any magnitude give
    finite-or-minus-inf results without overflow.
    """
    m = margins(params, X)
    out = np.empty((m.size, 2))
    out[:, 1] = -np.logaddexp(0.0, -m)
    out[:, 0] = -np.logaddexp(0.0, m)
    return out


def log_prob_and_grad(
    params: ClassifierParams, x: np.ndarray, y: int
) -> tuple[float, np.ndarray]:
    """log p(y|x) and its gradient over the flat weight vector."""
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y!r}")
    x = np.asarray(x, dtype=np.float64)
    X = x[None, :]
    value = float(log_prob_batch(params, X)[0, y])
    grad = weighted_grad(params, X, np.array([float(y)]))
    if not math.isfinite(value) or not np.all(np.isfinite(grad)):
        raise FloatingPointError(
            f"non-finite classifier log-prob/grad at weights={params.weights!r}"
        )
    return value, grad


def weighted_log_prob(params: ClassifierParams, X: np.ndarray, q: np.ndarray) -> float:
    """sum_i q_i log p(1|x_i) + (1-q_i) log p(0|x_i).

    With q in {0,1} this is the supervised log-likelihood; with q a posterior
    it is the expected complete-data term the marginal-likelihood gradient
    needs.
    """
    lp = log_prob_batch(params, X)
    q = np.asarray(q, dtype=np.float64)
    return float(np.sum(q * lp[:, 1] + (1.0 - q) * lp[:, 0]))


def weighted_grad(params: ClassifierParams, X: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Gradient of :func:`weighted_log_prob` over the flat weight vector.

    Both terms route through the margin, so the output error signal is just
    q - p regardless of kind.
    """
    X = _check_features(params, X)
    q = np.asarray(q, dtype=np.float64)
    err = q - _sigmoid(margins(params, X))
    if params.kind == "logistic":
        return np.concatenate([X.T @ err, [err.sum()]])
    W1, b1, w2, _ = _mlp_parts(params)
    h = np.tanh(X @ W1.T + b1)
    d_w2 = h.T @ err
    d_b2 = err.sum()
    back = (err[:, None] * w2[None, :]) * (1.0 - h * h)
    d_W1 = back.T @ X
    d_b1 = back.sum(axis=0)
    return np.concatenate([d_W1.ravel(), d_b1, d_w2, [d_b2]])


def weight_log_prior(params: ClassifierParams) -> tuple[float, np.ndarray]:
    """Zero-mean Gaussian log prior over weights and its gradient."""
    w = params.weights
    v = params.prior_variance
    value = float(-0.5 * np.dot(w, w) / v - 0.5 * w.size * math.log(2.0 * math.pi * v))
    return value, -w / v


def fit_weighted(
    params: ClassifierParams,
    X: np.ndarray,
    q: np.ndarray,
    *,
    max_iterations: int = 200,
    step_size: float = 1.0,
    backtrack: float = 0.5,
    tol: float = 1e-8,
) -> tuple[ClassifierParams, AscentResult]:
    """Penalized maximum likelihood on (soft-)labeled instances.

    Maximizes ``weighted_log_prob + weight_log_prior`` starting from the
    given weights.  The objective is left unscaled (so recorded values are
    exactly reproducible from the two terms); only the step length is
    normalized by the instance count, which makes the default step usable
    across dataset sizes.
    """
    X = _check_features(params, X)
    q = np.asarray(q, dtype=np.float64)

    def value_and_grad(w: np.ndarray) -> tuple[float, np.ndarray]:
        p = params.with_weights(w)
        pv, pg = weight_log_prior(p)
        return (
            weighted_log_prob(p, X, q) + pv,
            weighted_grad(p, X, q) + pg,
        )

    def value_only(w: np.ndarray) -> float:
        p = params.with_weights(w)
        return weighted_log_prob(p, X, q) + weight_log_prior(p)[0]

    result = ascend(
        params.weights,
        value_and_grad,
        value_only,
        max_iterations=max_iterations,
        step_size=step_size / max(1, X.shape[0]),
        backtrack=backtrack,
        tol=tol,
    )
    return params.with_weights(result.x), result
