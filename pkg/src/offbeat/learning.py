"""Penalized marginal-likelihood objective, its gradient, and the fitter.

The objective is the sum of per-session log marginal likelihoods (labels,
counts, and alignments summed out by the inference module) plus the joint
log prior.  Its gradient decomposes into posterior-weighted sums of the
per-component log-likelihood gradients:

* classifier: label-posterior-weighted score of each instance,
* count model: (count, label)-joint-posterior-weighted score,
* noise model: assignment-posterior-weighted score of each (instance, mark)
  pair,

plus the prior gradients.  This composition is validated end to end against
finite differences of the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifiers import predict_prob_batch, weighted_grad
from .data import Dataset, Session, median_spacing
from .model import ModelParams, init_params, log_prior, pack, unpack
from .inference import (
    compute_tables,
    log_marginal_likelihood,
    posterior_assignment_marginals,
    posterior_count_marginals,
)
from .observation import count_grad_table, noise_weighted_grad
from .optimize import ascend

__all__ = [
    "FitConfig",
    "FitError",
    "FitResult",
    "GradientBundle",
    "default_init",
    "objective_and_gradient",
    "penalized_log_likelihood",
    "fit",
    "predict_labels",
]


class FitError(RuntimeError):
    """Fitting cannot proceed (for example, infeasible data at the start)."""


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the gradient-ascent fit."""

    max_iterations: int = 200
    step_size: float = 1.0
    backtrack: float = 0.5
    convergence_tol: float = 1e-6
    seed: int = 0
    max_count: int = 1

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack must be in (0,1)")
        if not 0.0 < self.convergence_tol < 1.0:
            raise ValueError("convergence_tol must be in (0,1)")
        if self.max_count < 1:
            raise ValueError("max_count must be >= 1")


@dataclass(eq=False)
class GradientBundle:
    """Objective value and packed gradient; invalid when data is infeasible."""

    objective: float
    grads: np.ndarray
    infeasible_session: str | None = None

    @property
    def valid(self) -> bool:
        return self.infeasible_session is None


@dataclass(eq=False)
class FitResult:
    params: ModelParams
    trace: list[float]
    iterations: int
    converged: bool


def default_init(
    data: Dataset,
    kind: str = "logistic",
    *,
    hidden: int = 8,
    prior_variance: float = 1.0,
    num_components: int = 1,
    max_count: int = 1,
    beta_prior: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0),
    seed: int = 0,
) -> ModelParams:
    """Standard starting point: noise scale at the data's median spacing."""
    return init_params(
        kind,
        data.feature_dim,
        hidden=hidden,
        prior_variance=prior_variance,
        sigma_init=median_spacing(data),
        num_components=num_components,
        max_count=max_count,
        beta_prior=beta_prior,
        seed=seed,
    )


def _session_objective_and_grad(
    params: ModelParams, session: Session
) -> tuple[float, np.ndarray | None]:
    tables = compute_tables(session, params)
    if not tables.feasible:
        return -math.inf, None
    joint = posterior_count_marginals(tables)
    label_post = joint[:, :, 1].sum(axis=1)
    grad_clf = weighted_grad(params.classifier, session.features, label_post)

    score = count_grad_table(params.count)
    grad_count = np.array(
        [
            float(np.sum(joint[:, :, 0] * score[None, :, 0])),
            float(np.sum(joint[:, :, 1] * score[None, :, 1])),
        ]
    )

    assign = posterior_assignment_marginals(tables)
    d_logits, d_offsets, d_scales = noise_weighted_grad(
        params.noise, session.event_times, session.instance_times, assign
    )
    grad = np.concatenate([grad_clf, grad_count, d_logits, d_offsets, d_scales])
    return tables.log_marginal, grad


def objective_and_gradient(params: ModelParams, data: Dataset) -> GradientBundle:
    """Penalized objective and packed gradient over the whole dataset.

    Per-session log likelihoods are combined with compensated summation so
    the objective is invariant to session order.  Any infeasible session
    (more marks than L * max_count can explain) makes the objective -inf and
    the gradient NaN, with the offending session named.
    """
    prior_value, prior_grad = log_prior(params)
    terms = [prior_value]
    grad = prior_grad.copy()
    for session in data:
        value, g = _session_objective_and_grad(params, session)
        if g is None:
            return GradientBundle(
                -math.inf, np.full(params.packed_size, np.nan), session.session_id
            )
        terms.append(value)
        grad += g
    return GradientBundle(math.fsum(terms), grad)


def penalized_log_likelihood(params: ModelParams, data: Dataset) -> float:
    """Objective only (forward pass per session); -inf if any infeasible."""
    prior_value, _ = log_prior(params)
    terms = [prior_value]
    for session in data:
        value = log_marginal_likelihood(session, params)
        if value == -math.inf:
            return -math.inf
        terms.append(value)
    return math.fsum(terms)


def fit(data: Dataset, init: ModelParams, config: FitConfig) -> FitResult:
    """Maximize the penalized objective by backtracking gradient ascent.

    The accepted-step objective trace is non-decreasing; convergence is a
    relative-improvement test.  Feasibility depends only on (data,
    max_count), never on parameter values, so it is checked once up front.
    """
    if config.max_count != init.count.max_count:
        raise ValueError(
            f"config.max_count={config.max_count} does not match "
            f"init.count.max_count={init.count.max_count}"
        )
    first = objective_and_gradient(init, data)
    if not first.valid:
        raise FitError(
            f"session {first.infeasible_session!r} has more event marks than "
            f"L * max_count can explain; likelihood is identically zero"
        )

    def value_and_grad(vec: np.ndarray) -> tuple[float, np.ndarray]:
        bundle = objective_and_gradient(unpack(init, vec), data)
        return bundle.objective, bundle.grads

    def value_only(vec: np.ndarray) -> float:
        return penalized_log_likelihood(unpack(init, vec), data)

    # The objective stays unscaled (trace values are the true penalized
    # log-likelihoods); the step is normalized by instance count so the
    # default step size behaves the same across dataset sizes.
    result = ascend(
        pack(init),
        value_and_grad,
        value_only,
        max_iterations=config.max_iterations,
        step_size=config.step_size / max(1, data.total_instances),
        backtrack=config.backtrack,
        tol=config.convergence_tol,
    )
    return FitResult(
        params=unpack(init, result.x),
        trace=result.trace,
        iterations=result.iterations,
        converged=result.converged,
    )


def predict_labels(
    params: ModelParams, session: Session, threshold: float = 0.5
) -> np.ndarray:
    """Hard labels from the classifier head alone; p >= threshold is positive.

    The count and noise models are training-time machinery; at test time the
    classifier is the deliverable.
    """
    probs = predict_prob_batch(params.classifier, session.features)
    return (probs >= threshold).astype(np.int64)
