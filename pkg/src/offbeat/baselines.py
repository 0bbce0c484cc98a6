"""Comparison strategies: naive alignment, supervised, and witness selection.

``naive_align`` is the strawman the rest of the package improves on: call
the instance nearest each event mark positive and everything else negative,
then train as if those labels were clean.

``train_mi`` adapts the classic multiple-instance alternation to the
logistic loss: bag contiguous instances, label bags by naive alignment,
then alternate picking one witness per positive bag (the member the current
classifier likes best) with refitting on witnesses plus all negative-bag
instances.  Non-witness members of positive bags stay out of the refit.
Both half-steps can only lower the penalized negative log-likelihood, so the
recorded objective is non-increasing and the witness set reaches a fixed
point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .classifiers import (
    ClassifierParams,
    fit_weighted,
    init_classifier,
    predict_prob_batch,
    weight_log_prior,
    weighted_log_prob,
)
from .data import Dataset, Session

__all__ = [
    "Bag",
    "MIResult",
    "naive_align",
    "naive_align_session",
    "train_naive",
    "train_supervised",
    "make_bags",
    "train_mi",
]


@dataclass(frozen=True)
class Bag:
    """A contiguous block of instances with one block-level label."""

    start: int
    stop: int  # exclusive
    label: int
    witness_index: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.stop:
            raise ValueError(f"bad bag range [{self.start}, {self.stop})")
        if self.label not in (0, 1):
            raise ValueError(f"bag label must be 0/1, got {self.label}")
        if self.witness_index is not None:
            if self.label != 1:
                raise ValueError("negative bags cannot have a witness")
            if not self.start <= self.witness_index < self.stop:
                raise ValueError("witness must lie inside the bag")


def naive_align(instance_times: np.ndarray, event_times: np.ndarray) -> np.ndarray:
    """Binary labels: 1 for each instance nearest to some event mark.

    Distance ties break toward the earlier instance.  Multiple marks landing
    on one instance still produce a single 1.
    """
    t = np.asarray(instance_times, dtype=np.float64)
    z = np.asarray(event_times, dtype=np.float64)
    labels = np.zeros(t.size, dtype=np.int64)
    if z.size == 0:
        return labels
    right = np.searchsorted(t, z, side="left")
    left = np.clip(right - 1, 0, t.size - 1)
    right = np.clip(right, 0, t.size - 1)
    d_left = np.abs(z - t[left])
    d_right = np.abs(z - t[right])
    nearest = np.where(d_left <= d_right, left, right)
    labels[nearest] = 1
    return labels


def naive_align_session(session: Session) -> np.ndarray:
    return naive_align(session.instance_times, session.event_times)


def _dataset_matrix(data: Dataset) -> np.ndarray:
    return np.concatenate([s.features for s in data], axis=0)


def _fit_on_labels(
    data: Dataset,
    labels: np.ndarray,
    kind: str,
    prior_variance: float,
    hidden: int,
    seed: int,
    start: ClassifierParams | None = None,
    max_iterations: int = 300,
) -> ClassifierParams:
    if labels.min() == labels.max():
        warnings.warn(
            f"degenerate training labels (all {int(labels[0])}); "
            "the prior alone determines the fit",
            stacklevel=3,
        )
    clf = start
    if clf is None:
        clf = init_classifier(
            kind,
            data.feature_dim,
            hidden=hidden if kind == "mlp" else 0,
            prior_variance=prior_variance,
            seed=seed,
        )
    fitted, _ = fit_weighted(
        clf, _dataset_matrix(data), labels.astype(np.float64),
        max_iterations=max_iterations,
    )
    return fitted


def train_naive(
    data: Dataset,
    kind: str = "logistic",
    *,
    prior_variance: float = 1.0,
    hidden: int = 8,
    seed: int = 0,
) -> ClassifierParams:
    """Penalized maximum likelihood on naive-aligned labels."""
    labels = np.concatenate([naive_align_session(s) for s in data])
    return _fit_on_labels(data, labels, kind, prior_variance, hidden, seed)


def train_supervised(
    data: Dataset,
    kind: str = "logistic",
    *,
    prior_variance: float = 1.0,
    hidden: int = 8,
    seed: int = 0,
) -> ClassifierParams:
    """Penalized maximum likelihood on ground-truth labels (oracle ceiling)."""
    if not data.has_labels:
        raise ValueError("supervised training requires true labels on every session")
    labels = np.concatenate([s.true_labels for s in data])
    return _fit_on_labels(data, labels, kind, prior_variance, hidden, seed)


def make_bags(session: Session, bag_size: int) -> list[Bag]:
    """Partition a session into blocks of ``bag_size`` (last may be short).

    A bag is positive iff naive alignment marks any member positive.
    """
    if bag_size < 1:
        raise ValueError(f"bag_size must be >= 1, got {bag_size}")
    naive = naive_align_session(session)
    bags = []
    for start in range(0, session.num_instances, bag_size):
        stop = min(start + bag_size, session.num_instances)
        bags.append(Bag(start, stop, int(naive[start:stop].max(initial=0))))
    return bags


@dataclass(eq=False)
class MIResult:
    classifier: ClassifierParams
    objective_trace: list[float]  # penalized NLL after each refit
    alternations: int
    converged: bool  # witness fixed point reached within the cap
    bags: list[Bag]


def _penalized_nll(clf: ClassifierParams, X: np.ndarray, labels: np.ndarray) -> float:
    prior, _ = weight_log_prior(clf)
    return -(weighted_log_prob(clf, X, labels) + prior)


def train_mi(
    data: Dataset,
    bag_size: int,
    kind: str = "logistic",
    *,
    prior_variance: float = 1.0,
    hidden: int = 8,
    seed: int = 0,
    max_alternations: int = 50,
) -> MIResult:
    """Witness-selection alternation on naive-labeled bags.

    The classifier is seeded by naive-label training.  Each alternation
    re-picks the highest-scoring member of every positive bag as its
    witness, then warm-start refits on witnesses (positive) plus every
    member of every negative bag (negative).  Stops at a witness fixed
    point or after ``max_alternations``.
    """
    X = _dataset_matrix(data)
    bags: list[Bag] = []
    offset = 0
    for session in data:
        for bag in make_bags(session, bag_size):
            bags.append(Bag(bag.start + offset, bag.stop + offset, bag.label))
        offset += session.num_instances

    positive = [b for b in bags if b.label == 1]
    negative_members = np.concatenate(
        [np.arange(b.start, b.stop) for b in bags if b.label == 0]
        or [np.zeros(0, dtype=np.int64)]
    ).astype(np.int64)
    if not positive:
        warnings.warn("no positive bags; training on negative instances only",
                      stacklevel=2)

    clf = train_naive(
        data, kind, prior_variance=prior_variance, hidden=hidden, seed=seed
    )

    witnesses: np.ndarray | None = None
    trace: list[float] = []
    converged = False
    alternations = 0
    for _ in range(max_alternations):
        probs = predict_prob_batch(clf, X)
        new_witnesses = np.array(
            [b.start + int(np.argmax(probs[b.start : b.stop])) for b in positive],
            dtype=np.int64,
        )
        if witnesses is not None and np.array_equal(new_witnesses, witnesses):
            converged = True
            break
        witnesses = new_witnesses
        alternations += 1
        train_idx = np.concatenate([witnesses, negative_members])
        labels = np.concatenate(
            [np.ones(witnesses.size), np.zeros(negative_members.size)]
        )
        clf, _ = fit_weighted(clf, X[train_idx], labels, max_iterations=300)
        trace.append(_penalized_nll(clf, X[train_idx], labels))
    else:
        # Cap reached; check whether the last refit left witnesses stable.
        probs = predict_prob_batch(clf, X)
        final = np.array(
            [b.start + int(np.argmax(probs[b.start : b.stop])) for b in positive],
            dtype=np.int64,
        )
        converged = witnesses is not None and np.array_equal(final, witnesses)

    final_bags = list(bags)
    if positive and witnesses is not None:
        lookup = {id(b): w for b, w in zip(positive, witnesses)}
        final_bags = [
            Bag(b.start, b.stop, b.label, lookup.get(id(b)))
            for b in bags
        ]
    return MIResult(
        classifier=clf,
        objective_trace=trace,
        alternations=alternations,
        converged=converged,
        bags=final_bags,
    )
