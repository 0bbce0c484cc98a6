"""Self-contained health checks behind the ``check`` CLI command.

Each check re-derives a core guarantee from scratch: dynamic programming
against exhaustive enumeration, analytic gradients against central finite
differences, posterior mass conservation, and the monotonicity contracts of
both optimizers.  A fresh build must pass everything; a corrupted formula
must fail at least one check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import naive_align, train_mi
from .data import Dataset, Session
from .inference import (
    compute_tables,
    enumerate_joint,
    posterior_assignment_marginals,
    posterior_count_marginals,
    warm_up,
)
from .learning import (
    FitConfig,
    default_init,
    fit,
    objective_and_gradient,
    penalized_log_likelihood,
)
from .model import ModelParams, init_params, pack, unpack
from .synth import GenConfig, NoiseConfig, gen_sessions, inject_noise_dataset

__all__ = ["CheckResult", "run_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_model(
    rng: np.random.Generator, num_features: int, kind: str, components: int, max_count: int
) -> ModelParams:
    params = init_params(
        kind,
        num_features,
        hidden=4,
        sigma_init=float(rng.uniform(0.5, 1.5)),
        pi_init=(float(rng.uniform(0.05, 0.3)), float(rng.uniform(0.5, 0.95))),
        num_components=components,
        max_count=max_count,
        seed=int(rng.integers(2**31)),
    )
    vec = pack(params) + rng.normal(0.0, 0.3, pack(params).size)
    return unpack(params, vec)


def _random_instance(
    rng: np.random.Generator, num_features: int, max_count: int
) -> Session:
    length = int(rng.integers(2, 9))
    marks = int(rng.integers(0, min(3, length * max_count) + 1))
    times = np.cumsum(rng.uniform(0.3, 1.2, length))
    mark_times = np.sort(rng.uniform(times[0] - 1.0, times[-1] + 1.0, marks))
    features = rng.normal(size=(length, num_features))
    return Session("check", times, features, mark_times)


def _small_dataset(rng: np.random.Generator, num_features: int, max_count: int) -> Dataset:
    sessions = []
    for index in range(3):
        session = _random_instance(rng, num_features, max_count)
        sessions.append(
            Session(
                f"check-{index}",
                session.instance_times,
                session.features,
                session.event_times,
            )
        )
    return Dataset(tuple(sessions))


def _check_oracle(quick: bool, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    cases = 30 if quick else 150
    worst = 0.0
    for _ in range(cases):
        max_count = int(rng.integers(1, 4))
        kind = ("logistic", "mlp")[int(rng.integers(2))]
        components = int(rng.integers(1, 3))
        session = _random_instance(rng, 2, max_count)
        params = _random_model(rng, 2, kind, components, max_count)
        tables = compute_tables(session, params)
        enum = enumerate_joint(session, params)
        gap = abs(tables.log_marginal - enum.log_marginal)
        worst = max(worst, gap / max(1.0, abs(enum.log_marginal)))
        if session.num_instances and session.num_events:
            dp_assign = posterior_assignment_marginals(tables)
            worst = max(worst, float(np.max(np.abs(dp_assign - enum.assignment))))
        dp_counts = posterior_count_marginals(tables)
        worst = max(worst, float(np.max(np.abs(dp_counts - enum.count_label))))
    return CheckResult(
        "dp-vs-enumeration",
        worst <= 1e-10,
        f"{cases} random instances, worst relative gap {worst:.2e}",
    )


def _check_forward_backward(quick: bool, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(10):
        session = _random_instance(rng, 2, 1)
        params = _random_model(rng, 2, "logistic", 1, 1)
        tables = compute_tables(session, params)
        worst = max(worst, abs(tables.log_a[-1, -1] - tables.log_b[1, 1]))
    length, marks = (2000, 50) if quick else (10000, 100)
    times = np.arange(length, dtype=np.float64)
    session = Session(
        "stress",
        times,
        rng.normal(size=(length, 2)),
        np.sort(rng.uniform(0.0, float(length), marks)),
    )
    params = _random_model(rng, 2, "logistic", 1, 1)
    tables = compute_tables(session, params)
    worst = max(worst, abs(tables.log_a[-1, -1] - tables.log_b[1, 1]))
    return CheckResult(
        "forward-backward-consistency",
        worst <= 1e-9,
        f"worst |log a(L,M) - log b(1,1)| = {worst:.2e} incl. L={length}, M={marks}",
    )


def _check_gradient(quick: bool, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 2)
    repeats = 2 if quick else 6
    worst = 0.0
    for kind in ("logistic", "mlp"):
        for _ in range(repeats):
            max_count = int(rng.integers(1, 3))
            data = _small_dataset(rng, 2, max_count)
            params = _random_model(rng, 2, kind, int(rng.integers(1, 3)), max_count)
            bundle = objective_and_gradient(params, data)
            if not bundle.valid:
                continue
            vec = pack(params)
            step = 1e-5
            fd = np.empty_like(vec)
            for i in range(vec.size):
                up, down = vec.copy(), vec.copy()
                up[i] += step
                down[i] -= step
                fd[i] = (
                    penalized_log_likelihood(unpack(params, up), data)
                    - penalized_log_likelihood(unpack(params, down), data)
                ) / (2 * step)
            scale = max(1.0, float(np.max(np.abs(bundle.grads))))
            worst = max(worst, float(np.max(np.abs(fd - bundle.grads))) / scale)
    return CheckResult(
        "gradient-vs-finite-differences",
        worst <= 1e-6,
        f"both classifier kinds, worst relative gap {worst:.2e}",
    )


def _check_conservation(quick: bool, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed + 3)
    cases = 20 if quick else 60
    worst = 0.0
    for _ in range(cases):
        max_count = int(rng.integers(1, 4))
        session = _random_instance(rng, 2, max_count)
        params = _random_model(rng, 2, "logistic", 1, max_count)
        tables = compute_tables(session, params)
        counts = posterior_count_marginals(tables)
        expected = float(
            np.sum(counts.sum(axis=2) * np.arange(max_count + 1)[None, :])
        )
        worst = max(worst, abs(expected - session.num_events))
        if session.num_events:
            assign = posterior_assignment_marginals(tables)
            worst = max(worst, float(np.max(np.abs(assign.sum(axis=0) - 1.0))))
    return CheckResult(
        "posterior-conservation",
        worst <= 1e-9,
        f"{cases} instances, worst mass defect {worst:.2e}",
    )


def _fit_dataset(seed: int) -> Dataset:
    base = gen_sessions(
        GenConfig(
            sessions=3,
            instances_per_session=(40, 60),
            positive_rate=0.15,
            feature_dim=2,
            class_separation=3.0,
            burst_length=3.0,
            seed=seed,
        )
    )
    return inject_noise_dataset(
        base, NoiseConfig(sigma=0.8, pi_pos=0.9, pi_neg=0.02, seed=seed + 1)
    )


def _check_fit_monotone(quick: bool, seed: int) -> CheckResult:
    data = _fit_dataset(seed + 4)
    config = FitConfig(max_iterations=40 if quick else 150)
    result = fit(data, default_init(data, "logistic"), config)
    diffs = np.diff(result.trace)
    monotone = bool(np.all(diffs >= 0))
    improved = result.trace[-1] > result.trace[0]
    return CheckResult(
        "ascent-trace-monotone",
        monotone and improved,
        f"{result.iterations} iterations, objective {result.trace[0]:.2f} -> {result.trace[-1]:.2f}",
    )


def _check_mi(quick: bool, seed: int) -> CheckResult:
    data = _fit_dataset(seed + 5)
    result = train_mi(data, bag_size=4, seed=seed)
    trace = np.asarray(result.objective_trace)
    monotone = bool(np.all(np.diff(trace) <= 0))
    return CheckResult(
        "mi-alternation",
        monotone and result.converged and result.alternations <= 50,
        f"{result.alternations} alternations, fixed point {result.converged}, "
        f"penalized NLL {trace[0]:.2f} -> {trace[-1]:.2f}",
    )


def _check_alignment(quick: bool, seed: int) -> CheckResult:
    grid = np.array([0.0, 1.0, 2.0])
    cases = [
        (np.array([1.4]), [0, 1, 0]),
        (np.array([0.5]), [1, 0, 0]),  # exact midpoint goes to the earlier instance
        (np.array([-9.0, 9.0]), [1, 0, 1]),
    ]
    passed = all(naive_align(grid, z).tolist() == want for z, want in cases)
    return CheckResult(
        "naive-alignment-conventions",
        passed,
        "nearest-instance labels with earlier-on-tie and edge clamping",
    )


_CHECKS = (
    _check_oracle,
    _check_forward_backward,
    _check_gradient,
    _check_conservation,
    _check_fit_monotone,
    _check_mi,
    _check_alignment,
)


def run_checks(quick: bool = True, seed: int = 0) -> list[CheckResult]:
    """Run every diagnostic; quick mode shrinks case counts, not coverage."""
    warm_up()
    return [check(quick, seed) for check in _CHECKS]
