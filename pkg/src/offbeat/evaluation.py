"""Scoring, method dispatch, and session-level cross-validation.

A method spec names one of the five trainable detectors and carries its
hyperparameters plus optional tuning grids.  ``cross_validate`` splits
sessions (never instances) into folds, tunes on the training split with an
inner CV when a grid has more than one point, and scores pooled predictions
on the held-out sessions against ground-truth labels.  Reports serialize to
a fixed-header CSV.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from .baselines import train_mi, train_naive, train_supervised
from .classifiers import ClassifierParams, predict_prob_batch
from .data import Dataset
from .learning import FitConfig, fit, default_init
from .model import ModelParams

__all__ = [
    "BAG_GRID",
    "CSV_HEADER",
    "ExperimentReport",
    "METHOD_NAMES",
    "MethodSpec",
    "REG_GRID",
    "ReportRow",
    "TrainOutcome",
    "cross_validate",
    "predict_dataset",
    "score",
    "train_method",
]

METHOD_NAMES = ("lrm", "nnm", "lrn", "mi", "supervised")

# Default tuning grids: exponential for the prior variance, linear for the
# bag size.
REG_GRID = tuple(float(v) for v in np.logspace(-3.0, 3.0, 10))
BAG_GRID = tuple(range(1, 11))

CSV_HEADER = "method,fold,sigma,pi,B,reg,precision,recall,f1,wall_time,seed"


def score(pred: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    """Precision, recall, F1 with zero-denominator conventions.

    No predicted positives gives precision 0, no true positives gives
    recall 0, and F1 is 0 whenever precision + recall is.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth != 1)))
    fn = int(np.sum((pred != 1) & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    total = precision + recall
    f1 = 2.0 * precision * recall / total if total else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class ReportRow:
    """One scored result; optional columns are None when not applicable."""

    method: str
    fold: int
    sigma: float | None
    pi: float | None
    B: int | None
    reg: float | None
    precision: float
    recall: float
    f1: float
    wall_time: float
    seed: int

    def __post_init__(self) -> None:
        for name in ("precision", "recall", "f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        total = self.precision + self.recall
        expected = 2.0 * self.precision * self.recall / total if total else 0.0
        if abs(self.f1 - expected) > 1e-12:
            raise ValueError(
                f"f1 {self.f1} inconsistent with precision/recall (expect {expected})"
            )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentReport:
    """An ordered collection of report rows with CSV round-tripping."""

    rows: tuple[ReportRow, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    def select(self, **fields) -> tuple[ReportRow, ...]:
        """Rows whose named attributes equal the given values."""
        return tuple(
            row
            for row in self.rows
            if all(getattr(row, name) == value for name, value in fields.items())
        )

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_HEADER.split(","))
            for row in self.rows:
                writer.writerow(
                    _cell(getattr(row, name)) for name in CSV_HEADER.split(",")
                )
        return path

    @classmethod
    def read_csv(cls, path) -> "ExperimentReport":
        path = Path(path)
        with path.open(newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != CSV_HEADER.split(","):
                raise ValueError(f"{path}: unexpected header {header}")
            rows = []
            for record in reader:
                if len(record) != 11:
                    raise ValueError(f"{path}: row has {len(record)} fields: {record}")
                (method, fold, sigma, pi, bag, reg,
                 precision, recall, f1, wall, seed) = record
                rows.append(
                    ReportRow(
                        method=method,
                        fold=int(fold),
                        sigma=float(sigma) if sigma else None,
                        pi=float(pi) if pi else None,
                        B=int(bag) if bag else None,
                        reg=float(reg) if reg else None,
                        precision=float(precision),
                        recall=float(recall),
                        f1=float(f1),
                        wall_time=float(wall),
                        seed=int(seed),
                    )
                )
        return cls(tuple(rows))


@dataclass(frozen=True)
class MethodSpec:
    """A trainable detector plus its hyperparameters and tuning grids.

    Grids with at most one point skip the inner CV; ``reg_grid`` tunes the
    prior variance for every method and ``bag_grid`` tunes the bag size for
    ``mi`` only.
    """

    name: str
    prior_variance: float = 1.0
    hidden: int = 8
    bag_size: int = 5
    noise_components: int = 1
    threshold: float = 0.5
    fit: FitConfig = field(default_factory=FitConfig)
    reg_grid: tuple[float, ...] = ()
    bag_grid: tuple[int, ...] = ()
    inner_folds: int = 3

    def __post_init__(self) -> None:
        if self.name not in METHOD_NAMES:
            raise ValueError(f"method must be one of {METHOD_NAMES}, got {self.name!r}")
        if self.prior_variance <= 0:
            raise ValueError("prior_variance must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.bag_size < 1:
            raise ValueError("bag_size must be at least 1")
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be at least 2")

    def grid(self) -> tuple["MethodSpec", ...]:
        """Expand the tuning grids into concrete candidate specs."""
        regs = self.reg_grid or (self.prior_variance,)
        bags = (self.bag_grid or (self.bag_size,)) if self.name == "mi" else (self.bag_size,)
        return tuple(
            replace(self, prior_variance=reg, bag_size=bag, reg_grid=(), bag_grid=())
            for reg, bag in product(regs, bags)
        )


@dataclass(eq=False)
class TrainOutcome:
    """A fitted detector: the classifier head plus training diagnostics."""

    classifier: ClassifierParams
    model: ModelParams | None = None
    trace: tuple[float, ...] = ()
    alternations: int | None = None
    converged: bool = True


def train_method(data: Dataset, spec: MethodSpec, seed: int = 0) -> TrainOutcome:
    """Train one detector on the full dataset per the spec."""
    if spec.name in ("lrm", "nnm"):
        kind = "logistic" if spec.name == "lrm" else "mlp"
        init = default_init(
            data,
            kind,
            hidden=spec.hidden,
            prior_variance=spec.prior_variance,
            num_components=spec.noise_components,
            max_count=spec.fit.max_count,
            seed=seed,
        )
        result = fit(data, init, replace(spec.fit, seed=seed))
        return TrainOutcome(
            classifier=result.params.classifier,
            model=result.params,
            trace=tuple(result.trace),
            converged=result.converged,
        )
    if spec.name == "lrn":
        clf = train_naive(data, prior_variance=spec.prior_variance, seed=seed)
        return TrainOutcome(classifier=clf)
    if spec.name == "supervised":
        clf = train_supervised(data, prior_variance=spec.prior_variance, seed=seed)
        return TrainOutcome(classifier=clf)
    result = train_mi(data, spec.bag_size, prior_variance=spec.prior_variance, seed=seed)
    return TrainOutcome(
        classifier=result.classifier,
        trace=tuple(result.objective_trace),
        alternations=result.alternations,
        converged=result.converged,
    )


def predict_dataset(
    classifier: ClassifierParams, data: Dataset, threshold: float = 0.5
) -> np.ndarray:
    """Pooled hard labels over every instance of every session, in order."""
    parts = [
        (predict_prob_batch(classifier, session.features) >= threshold).astype(np.int64)
        for session in data
    ]
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def _truth(data: Dataset) -> np.ndarray:
    return np.concatenate([session.true_labels for session in data])


def _partition(num_sessions: int, folds: int, seed: int) -> list[np.ndarray]:
    order = np.random.default_rng(seed).permutation(num_sessions)
    return [np.sort(chunk) for chunk in np.array_split(order, folds)]


def _mean_inner_f1(train: Dataset, candidate: MethodSpec, seed: int) -> float:
    inner = min(candidate.inner_folds, len(train))
    if inner < 2:
        # A single training session cannot be split; fall back to
        # training-set F1 so tuning stays defined.
        outcome = train_method(train, candidate, seed=seed)
        pred = predict_dataset(outcome.classifier, train, candidate.threshold)
        return score(pred, _truth(train))[2]
    scores = []
    for test_idx in _partition(len(train), inner, seed):
        keep = np.setdiff1d(np.arange(len(train)), test_idx)
        fit_data = train.subset(keep)
        held = train.subset(test_idx)
        outcome = train_method(fit_data, candidate, seed=seed)
        pred = predict_dataset(outcome.classifier, held, candidate.threshold)
        scores.append(score(pred, _truth(held))[2])
    return float(np.mean(scores))


def _tune(train: Dataset, spec: MethodSpec, seed: int) -> MethodSpec:
    candidates = spec.grid()
    if len(candidates) == 1:
        return candidates[0]
    best = None
    best_f1 = -1.0
    for candidate in candidates:
        mean_f1 = _mean_inner_f1(train, candidate, seed)
        # Strict inequality keeps the first grid point on ties.
        if mean_f1 > best_f1:
            best, best_f1 = candidate, mean_f1
    return best


def cross_validate(
    data: Dataset, spec: MethodSpec, folds: int = 10, seed: int = 0
) -> ExperimentReport:
    """Session-level K-fold evaluation with per-fold hyperparameter tuning.

    Sessions are shuffled once by the seed and split into K folds; each
    fold's row reports pooled test metrics, the tuned hyperparameters, and
    the training wall time (tuning included).
    """
    if not data.has_labels:
        raise ValueError("cross_validate requires ground-truth labels")
    if not 2 <= folds <= len(data):
        raise ValueError(
            f"folds must lie in [2, {len(data)}] for {len(data)} sessions, got {folds}"
        )
    rows = []
    for k, test_idx in enumerate(_partition(len(data), folds, seed)):
        train_idx = np.setdiff1d(np.arange(len(data)), test_idx)
        train = data.subset(train_idx)
        test = data.subset(test_idx)
        started = time.perf_counter()
        chosen = _tune(train, spec, seed)
        outcome = train_method(train, chosen, seed=seed)
        wall = time.perf_counter() - started
        truth = _truth(test)
        if not truth.any():
            warnings.warn(
                f"fold {k} has no positive instances; scored under conventions",
                stacklevel=2,
            )
        precision, recall, f1 = score(
            predict_dataset(outcome.classifier, test, chosen.threshold), truth
        )
        rows.append(
            ReportRow(
                method=spec.name,
                fold=k,
                sigma=None,
                pi=None,
                B=chosen.bag_size if spec.name == "mi" else None,
                reg=chosen.prior_variance,
                precision=precision,
                recall=recall,
                f1=f1,
                wall_time=wall,
                seed=seed,
            )
        )
    return ExperimentReport(tuple(rows))
