"""Shared builders for randomized test cases.

The builders here are deliberately simple and self-contained so tests can
construct adversarial inputs without leaning on the code under test.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from offbeat.data import Dataset, Session
from offbeat.inference import warm_up
from offbeat.model import ModelParams, init_params, pack, unpack

settings.register_profile("suite", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # Compile the DP kernels once so no individual test pays for it.
    warm_up()


def random_session(
    rng: np.random.Generator,
    num_features: int = 2,
    max_count: int = 1,
    max_len: int = 8,
    max_marks: int = 3,
    name: str = "case",
) -> Session:
    length = int(rng.integers(2, max_len + 1))
    marks = int(rng.integers(0, min(max_marks, length * max_count) + 1))
    times = np.cumsum(rng.uniform(0.3, 1.2, length))
    mark_times = np.sort(rng.uniform(times[0] - 1.0, times[-1] + 1.0, marks))
    return Session(name, times, rng.normal(size=(length, num_features)), mark_times)


def random_model(
    rng: np.random.Generator,
    num_features: int = 2,
    kind: str = "logistic",
    components: int = 1,
    max_count: int = 1,
    jitter: float = 0.3,
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
    vec = pack(params)
    return unpack(params, vec + rng.normal(0.0, jitter, vec.size))


def random_dataset(
    rng: np.random.Generator,
    sessions: int = 3,
    num_features: int = 2,
    max_count: int = 1,
) -> Dataset:
    built = []
    for index in range(sessions):
        session = random_session(rng, num_features, max_count, name=f"case-{index}")
        built.append(session)
    return Dataset(tuple(built))
