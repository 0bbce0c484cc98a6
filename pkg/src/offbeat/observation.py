"""Event-count and timestamp-noise observation models.

The count model gives p(o = c | y): how many event marks an instance emits
given its latent label.  The paper case is Bernoulli (an instance emits zero
or one mark); the generalization to a maximum count C is Binomial(C, pi_y),
which collapses to the Bernoulli table exactly at C = 1.

The noise model gives the density of an emitted mark's recorded time around
the emitting instance's time: a K-component Gaussian mixture over the offset
z - t.

Both live in unconstrained coordinates (logits for probabilities, softmax
logits for mixture weights, log scales) so the optimizer never sees a
constraint.  All gradients here are chain-ruled through those transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "PI_EPS",
    "CountParams",
    "NoiseParams",
    "count_log_prob",
    "count_log_prob_table",
    "count_grad_table",
    "count_log_prior",
    "noise_log_density",
    "noise_log_density_matrix",
    "noise_component_log_density",
    "noise_weighted_grad",
    "noise_log_prior",
    "ObservationGrads",
    "observation_grads",
]

# Emission probabilities are clamped to [PI_EPS, 1 - PI_EPS] after the logit
# transform: a hard zero would put -inf into the dynamic program.  Within the
# clamp the map logit -> pi is flat, so the matching gradient is zero there.
PI_EPS = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


def _clamp_prob(p: float) -> float:
    return min(max(p, PI_EPS), 1.0 - PI_EPS)


def _sigmoid_scalar(u: float) -> float:
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


@dataclass(frozen=True, eq=False)
class CountParams:
    """Per-label emission probabilities, stored as logits.

    ``beta_prior`` holds (alpha0, beta0, alpha1, beta1) for independent Beta
    priors on pi0 and pi1; the default (1,1,1,1) is uniform and contributes a
    constant with zero gradient.
    """

    logit_pi0: float
    logit_pi1: float
    max_count: int = 1
    beta_prior: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if self.max_count < 1:
            raise ValueError(f"max_count must be >= 1, got {self.max_count}")
        if len(self.beta_prior) != 4 or any(v <= 0 for v in self.beta_prior):
            raise ValueError(f"beta_prior needs 4 positive values, got {self.beta_prior}")
        for name in ("logit_pi0", "logit_pi1"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_probs(
        cls,
        pi0: float,
        pi1: float,
        max_count: int = 1,
        beta_prior: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0),
    ) -> "CountParams":
        def logit(p: float) -> float:
            p = _clamp_prob(p)
            return math.log(p / (1.0 - p))

        return cls(logit(pi0), logit(pi1), max_count, tuple(beta_prior))

    @property
    def pi0(self) -> float:
        return _clamp_prob(_sigmoid_scalar(self.logit_pi0))

    @property
    def pi1(self) -> float:
        return _clamp_prob(_sigmoid_scalar(self.logit_pi1))

    def with_logits(self, logit_pi0: float, logit_pi1: float) -> "CountParams":
        return replace(self, logit_pi0=float(logit_pi0), logit_pi1=float(logit_pi1))


def count_log_prob(params: CountParams, c: int, y: int) -> float:
    """log p(o = c | y) under Binomial(max_count, pi_y)."""
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y!r}")
    if not 0 <= c <= params.max_count:
        raise ValueError(f"count must be in 0..{params.max_count}, got {c}")
    return float(count_log_prob_table(params)[c, y])


def count_log_prob_table(params: CountParams) -> np.ndarray:
    """(max_count+1, 2) table of log p(o = c | y), columns indexed by y."""
    n = params.max_count
    c = np.arange(n + 1, dtype=np.float64)
    log_choose = (
        math.lgamma(n + 1)
        - np.array([math.lgamma(k + 1) + math.lgamma(n - k + 1) for k in range(n + 1)])
    )
    out = np.empty((n + 1, 2))
    for y, pi in ((0, params.pi0), (1, params.pi1)):
        out[:, y] = log_choose + c * math.log(pi) + (n - c) * math.log1p(-pi)
    return out


def _clamp_active(logit: float) -> bool:
    raw = _sigmoid_scalar(logit)
    return raw < PI_EPS or raw > 1.0 - PI_EPS


def count_grad_table(params: CountParams) -> np.ndarray:
    """(max_count+1, 2) table: d log p(c|y) / d logit_pi_y, per column y.

    Entries in column y differentiate with respect to that label's own logit
    (the cross derivative is zero).  Inside the clamp the derivative of the
    Binomial log-pmf is c - max_count * pi_y; at the clamp it is zero.
    """
    n = params.max_count
    c = np.arange(n + 1, dtype=np.float64)
    out = np.empty((n + 1, 2))
    for y, (logit, pi) in ((0, (params.logit_pi0, params.pi0)), (1, (params.logit_pi1, params.pi1))):
        out[:, y] = 0.0 if _clamp_active(logit) else c - n * pi
    return out


def count_log_prior(params: CountParams) -> tuple[float, np.ndarray]:
    """Beta log-prior over (pi0, pi1); gradient over the two logits."""
    a0, b0, a1, b1 = params.beta_prior
    value = 0.0
    grad = np.zeros(2)
    for idx, (a, b, logit, pi) in enumerate(
        ((a0, b0, params.logit_pi0, params.pi0), (a1, b1, params.logit_pi1, params.pi1))
    ):
        log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        value += (a - 1.0) * math.log(pi) + (b - 1.0) * math.log1p(-pi) - log_beta
        if not _clamp_active(logit):
            grad[idx] = (a - 1.0) * (1.0 - pi) - (b - 1.0) * pi
    return value, grad


@dataclass(frozen=True, eq=False)
class NoiseParams:
    """Gaussian-mixture density over the offset between mark and source time.

    Component weights are stored as softmax logits, scales as log sigma.
    Priors (fixed forms): standard normal on each offset, inverse-Gamma with
    shape 1 and scale 1 on each squared scale.
    """

    weight_logits: np.ndarray
    offsets: np.ndarray
    log_scales: np.ndarray

    def __post_init__(self) -> None:
        logits = np.asarray(self.weight_logits, dtype=np.float64)
        offsets = np.asarray(self.offsets, dtype=np.float64)
        log_scales = np.asarray(self.log_scales, dtype=np.float64)
        k = logits.size
        if k < 1:
            raise ValueError("noise model needs at least one component")
        for name, arr in (("weight_logits", logits), ("offsets", offsets), ("log_scales", log_scales)):
            if arr.shape != (k,):
                raise ValueError(f"{name} must have shape ({k},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        for arr in (logits, offsets, log_scales):
            arr.setflags(write=False)
        object.__setattr__(self, "weight_logits", logits)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "log_scales", log_scales)

    @property
    def num_components(self) -> int:
        return self.weight_logits.size

    @property
    def weights(self) -> np.ndarray:
        shifted = self.weight_logits - self.weight_logits.max()
        e = np.exp(shifted)
        return e / e.sum()

    @property
    def log_weights(self) -> np.ndarray:
        shifted = self.weight_logits - self.weight_logits.max()
        return shifted - math.log(np.exp(shifted).sum())

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    def replace_arrays(self, weight_logits, offsets, log_scales) -> "NoiseParams":
        return NoiseParams(weight_logits, offsets, log_scales)


def noise_component_log_density(
    params: NoiseParams, event_times: np.ndarray, instance_times: np.ndarray
) -> np.ndarray:
    """(K, L, M) per-component log joint log gamma_k + log N(z - t; mu_k, sigma_k^2)."""
    z = np.asarray(event_times, dtype=np.float64)
    t = np.asarray(instance_times, dtype=np.float64)
    dev = z[None, None, :] - t[None, :, None] - params.offsets[:, None, None]
    sig = params.scales[:, None, None]
    return (
        params.log_weights[:, None, None]
        - params.log_scales[:, None, None]
        - 0.5 * _LOG_2PI
        - 0.5 * (dev / sig) ** 2
    )


def noise_log_density_matrix(
    params: NoiseParams, event_times: np.ndarray, instance_times: np.ndarray
) -> np.ndarray:
    """(L, M) matrix of mixture log densities log p(z_m | t_i)."""
    z = np.asarray(event_times, dtype=np.float64)
    t = np.asarray(instance_times, dtype=np.float64)
    if z.size == 0 or t.size == 0:
        return np.zeros((t.size, z.size))
    acc = None
    for k in range(params.num_components):
        dev = (z[None, :] - t[:, None] - params.offsets[k]) / params.scales[k]
        term = (
            params.log_weights[k]
            - params.log_scales[k]
            - 0.5 * _LOG_2PI
            - 0.5 * dev * dev
        )
        acc = term if acc is None else np.logaddexp(acc, term)
    return acc


def noise_log_density(params: NoiseParams, z: float, t: float) -> float:
    """Mixture log density of one mark time around one instance time."""
    value = float(noise_log_density_matrix(params, np.array([z]), np.array([t]))[0, 0])
    if not math.isfinite(value):
        raise FloatingPointError(f"non-finite noise log density at z={z}, t={t}")
    return value


def noise_weighted_grad(
    params: NoiseParams,
    event_times: np.ndarray,
    instance_times: np.ndarray,
    weight: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of sum_{i,m} weight[i,m] * log p(z_m | t_i).

    Returns (d weight_logits, d offsets, d log_scales), each shape (K,).
    Uses per-pair component responsibilities; pairs with zero total density
    contribute nothing.
    """
    z = np.asarray(event_times, dtype=np.float64)
    t = np.asarray(instance_times, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    K = params.num_components
    if z.size == 0 or t.size == 0:
        return np.zeros(K), np.zeros(K), np.zeros(K)
    comp = noise_component_log_density(params, z, t)
    total = comp[0]
    for k in range(1, K):
        total = np.logaddexp(total, comp[k])
    with np.errstate(invalid="ignore"):
        resp = np.exp(comp - total[None, :, :])
    resp[:, ~np.isfinite(total)] = 0.0

    gamma = params.weights
    sig = params.scales
    dev = z[None, None, :] - t[None, :, None] - params.offsets[:, None, None]
    wr = w[None, :, :] * resp
    w_total = w.sum()
    d_logits = wr.sum(axis=(1, 2)) - gamma * w_total
    d_offsets = (wr * dev).sum(axis=(1, 2)) / (sig**2)
    d_log_scales = (wr * ((dev / sig[:, None, None]) ** 2 - 1.0)).sum(axis=(1, 2))
    return d_logits, d_offsets, d_log_scales


def noise_log_prior(params: NoiseParams) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Log prior over noise parameters and its unconstrained gradients.

    Standard normal on offsets; inverse-Gamma(1, 1) on squared scales, whose
    normalizing constant vanishes.  Mixture-weight logits carry no prior.
    """
    mu = params.offsets
    var = params.scales**2
    value = float(
        np.sum(-0.5 * mu**2 - 0.5 * _LOG_2PI) + np.sum(-2.0 * np.log(var) - 1.0 / var)
    )
    d_logits = np.zeros(params.num_components)
    d_offsets = -mu
    d_log_scales = -4.0 + 2.0 / var
    return value, d_logits, d_offsets, d_log_scales


@dataclass(frozen=True)
class ObservationGrads:
    """Gradient bundle for one (count, label, mark, instance) observation."""

    d_logit_pi0: float
    d_logit_pi1: float
    d_weight_logits: np.ndarray
    d_offsets: np.ndarray
    d_log_scales: np.ndarray


def observation_grads(
    count: CountParams,
    noise: NoiseParams,
    c: int,
    y: int,
    z: float,
    t: float,
) -> ObservationGrads:
    """Analytic gradients of log p(c|y) + log p(z|t) in unconstrained coords."""
    table = count_grad_table(count)
    d_pi = [0.0, 0.0]
    d_pi[y] = float(table[c, y])
    d_logits, d_offsets, d_log_scales = noise_weighted_grad(
        noise, np.array([z]), np.array([t]), np.ones((1, 1))
    )
    bundle = ObservationGrads(d_pi[0], d_pi[1], d_logits, d_offsets, d_log_scales)
    flat = np.concatenate([[bundle.d_logit_pi0, bundle.d_logit_pi1], d_logits, d_offsets, d_log_scales])
    if not np.all(np.isfinite(flat)):
        raise FloatingPointError("non-finite observation gradient")
    return bundle
