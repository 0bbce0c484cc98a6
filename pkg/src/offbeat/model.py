"""The complete parameter bundle: classifier + count model + noise model.

Provides the flat pack/unpack used by the optimizer, the joint log prior,
and the ``.psi`` text serialization.

Packed layout (in order): classifier weights, the two count logits, then the
noise model's weight logits, offsets, and log scales.

Model file format::

    psi version=1
    classifier kind=<k> D=<D> H=<H> prior_variance=<v>
    <one weight per line>
    count pi0=<v> pi1=<v> logit0=<v> logit1=<v> cmax=<C> beta0=<a>,<b> beta1=<a>,<b>
    noise K=<K>
    gamma=<v> mu=<v> sigma=<v> rho=<v> logsigma=<v>      (K lines)

``pi0``/``pi1``/``gamma``/``sigma`` are the human-readable constrained
values; the redundant ``logit*``/``rho``/``logsigma`` fields carry the exact
unconstrained coordinates so a round trip is lossless (the constrained maps
are not injective at the clamp, and softmax drops one degree of freedom).
Noise components are written sorted by offset so runs are comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .classifiers import ClassifierParams, init_classifier, num_weights, weight_log_prior
from .data import LoadError
from .observation import (
    CountParams,
    NoiseParams,
    count_log_prior,
    noise_log_prior,
)

__all__ = [
    "ModelParams",
    "init_params",
    "pack",
    "unpack",
    "log_prior",
    "save_model",
    "load_model",
]


@dataclass(frozen=True, eq=False)
class ModelParams:
    classifier: ClassifierParams
    count: CountParams
    noise: NoiseParams

    @property
    def packed_size(self) -> int:
        return self.classifier.weights.size + 2 + 3 * self.noise.num_components


def init_params(
    kind: str,
    num_features: int,
    *,
    hidden: int = 8,
    prior_variance: float = 1.0,
    pi_init: tuple[float, float] = (0.01, 0.9),
    sigma_init: float = 1.0,
    num_components: int = 1,
    max_count: int = 1,
    beta_prior: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0),
    seed: int = 0,
) -> ModelParams:
    """Default starting point for fitting.

    ``sigma_init`` should be the median inter-instance spacing of the
    training data.  With one noise component the offset starts at 0 and the
    scale at ``sigma_init`` exactly; with K > 1 those values get a small
    deterministic spread (offsets +-10% of sigma, scales a matching
    multiplicative ladder), because identical components are a symmetric
    stationary point the gradient cannot leave.
    """
    if sigma_init <= 0:
        raise ValueError(f"sigma_init must be positive, got {sigma_init}")
    classifier = init_classifier(
        kind, num_features, hidden=hidden if kind == "mlp" else 0,
        prior_variance=prior_variance, seed=seed,
    )
    count = CountParams.from_probs(pi_init[0], pi_init[1], max_count, beta_prior)
    k = num_components
    if k == 1:
        offsets = np.zeros(1)
        log_scales = np.array([math.log(sigma_init)])
    else:
        spread = np.linspace(-0.1, 0.1, k)
        offsets = spread * sigma_init
        log_scales = math.log(sigma_init) + spread
    noise = NoiseParams(np.zeros(k), offsets, log_scales)
    return ModelParams(classifier, count, noise)


def pack(params: ModelParams) -> np.ndarray:
    """Flatten all unconstrained parameters into one vector."""
    return np.concatenate(
        [
            params.classifier.weights,
            [params.count.logit_pi0, params.count.logit_pi1],
            params.noise.weight_logits,
            params.noise.offsets,
            params.noise.log_scales,
        ]
    )


def unpack(template: ModelParams, vec: np.ndarray) -> ModelParams:
    """Rebuild a ModelParams from a packed vector, shapes from ``template``."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (template.packed_size,):
        raise ValueError(
            f"packed vector must have shape ({template.packed_size},), got {vec.shape}"
        )
    n_w = template.classifier.weights.size
    k = template.noise.num_components
    classifier = template.classifier.with_weights(vec[:n_w])
    count = template.count.with_logits(vec[n_w], vec[n_w + 1])
    base = n_w + 2
    noise = NoiseParams(
        vec[base : base + k], vec[base + k : base + 2 * k], vec[base + 2 * k :]
    )
    return ModelParams(classifier, count, noise)


def log_prior(params: ModelParams) -> tuple[float, np.ndarray]:
    """Joint log prior and its gradient in packed layout."""
    wv, wg = weight_log_prior(params.classifier)
    cv, cg = count_log_prior(params.count)
    nv, ng_logits, ng_offsets, ng_scales = noise_log_prior(params.noise)
    value = wv + cv + nv
    grad = np.concatenate([wg, cg, ng_logits, ng_offsets, ng_scales])
    return value, grad


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _kv_tokens(tokens: list[str], path: Path, lineno: int) -> dict[str, str]:
    out: dict[str, str] = {}
    for token in tokens:
        if "=" not in token:
            raise LoadError(f"{path}:{lineno}: expected key=value, got {token!r}")
        key, _, value = token.partition("=")
        out[key] = value
    return out


def _require(kv: dict[str, str], key: str, path: Path, lineno: int) -> str:
    if key not in kv:
        raise LoadError(f"{path}:{lineno}: missing field {key!r}")
    return kv[key]


def save_model(params: ModelParams, path) -> Path:
    """Write the ``.psi`` text form; noise components sorted by offset."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    clf = params.classifier
    cnt = params.count
    noise = params.noise
    order = np.argsort(noise.offsets, kind="stable")
    gammas = noise.weights[order]
    lines = [
        "psi version=1",
        f"classifier kind={clf.kind} D={clf.num_features} H={clf.hidden} "
        f"prior_variance={clf.prior_variance!r}",
    ]
    lines.extend(repr(float(w)) for w in clf.weights)
    a0, b0, a1, b1 = cnt.beta_prior
    lines.append(
        f"count pi0={cnt.pi0!r} pi1={cnt.pi1!r} "
        f"logit0={cnt.logit_pi0!r} logit1={cnt.logit_pi1!r} "
        f"cmax={cnt.max_count} beta0={a0!r},{b0!r} beta1={a1!r},{b1!r}"
    )
    lines.append(f"noise K={noise.num_components}")
    for pos, k in enumerate(order):
        lines.append(
            f"gamma={float(gammas[pos])!r} mu={float(noise.offsets[k])!r} "
            f"sigma={float(noise.scales[k])!r} rho={float(noise.weight_logits[k])!r} "
            f"logsigma={float(noise.log_scales[k])!r}"
        )
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target


def _parse_pair(raw: str, path: Path, lineno: int) -> tuple[float, float]:
    parts = raw.split(",")
    if len(parts) != 2:
        raise LoadError(f"{path}:{lineno}: expected '<a>,<b>', got {raw!r}")
    return float(parts[0]), float(parts[1])


def load_model(path) -> ModelParams:
    """Parse a ``.psi`` file back into ModelParams."""
    source = Path(path)
    if not source.is_file():
        raise LoadError(f"{source}: no such model file")
    lines = source.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split() != ["psi", "version=1"]:
        raise LoadError(f"{source}:1: expected header 'psi version=1'")

    cursor = 1

    def take(expect: str) -> tuple[list[str], int]:
        nonlocal cursor
        if cursor >= len(lines):
            raise LoadError(f"{source}:{len(lines)}: unexpected end of file")
        lineno = cursor + 1
        parts = lines[cursor].split()
        cursor += 1
        if not parts or parts[0] != expect:
            raise LoadError(f"{source}:{lineno}: expected {expect!r} section")
        return parts[1:], lineno

    tokens, lineno = take("classifier")
    kv = _kv_tokens(tokens, source, lineno)
    kind = _require(kv, "kind", source, lineno)
    d = int(_require(kv, "D", source, lineno))
    h = int(_require(kv, "H", source, lineno))
    prior_variance = float(kv.get("prior_variance", "1.0"))
    try:
        n = num_weights(kind, d, h)
    except ValueError as exc:
        raise LoadError(f"{source}:{lineno}: {exc}") from None
    weights = np.empty(n)
    for j in range(n):
        if cursor >= len(lines):
            raise LoadError(f"{source}:{len(lines)}: expected {n} weight lines")
        try:
            weights[j] = float(lines[cursor])
        except ValueError:
            raise LoadError(
                f"{source}:{cursor + 1}: bad weight {lines[cursor]!r}"
            ) from None
        cursor += 1
    try:
        classifier = ClassifierParams(kind, d, h, weights, prior_variance)
    except ValueError as exc:
        raise LoadError(f"{source}: {exc}") from None

    tokens, lineno = take("count")
    kv = _kv_tokens(tokens, source, lineno)
    cmax = int(kv.get("cmax", "1"))
    beta0 = _parse_pair(kv.get("beta0", "1.0,1.0"), source, lineno)
    beta1 = _parse_pair(kv.get("beta1", "1.0,1.0"), source, lineno)
    beta = (beta0[0], beta0[1], beta1[0], beta1[1])
    try:
        if "logit0" in kv and "logit1" in kv:
            count = CountParams(float(kv["logit0"]), float(kv["logit1"]), cmax, beta)
        else:
            count = CountParams.from_probs(
                float(_require(kv, "pi0", source, lineno)),
                float(_require(kv, "pi1", source, lineno)),
                cmax,
                beta,
            )
    except ValueError as exc:
        raise LoadError(f"{source}:{lineno}: {exc}") from None

    tokens, lineno = take("noise")
    kv = _kv_tokens(tokens, source, lineno)
    k = int(_require(kv, "K", source, lineno))
    if k < 1:
        raise LoadError(f"{source}:{lineno}: K must be >= 1")
    logits = np.empty(k)
    offsets = np.empty(k)
    log_scales = np.empty(k)
    for j in range(k):
        if cursor >= len(lines):
            raise LoadError(f"{source}:{len(lines)}: expected {k} component lines")
        comp_lineno = cursor + 1
        comp = _kv_tokens(lines[cursor].split(), source, comp_lineno)
        cursor += 1
        offsets[j] = float(_require(comp, "mu", source, comp_lineno))
        if "rho" in comp:
            logits[j] = float(comp["rho"])
        else:
            gamma = float(_require(comp, "gamma", source, comp_lineno))
            if not 0.0 < gamma <= 1.0:
                raise LoadError(f"{source}:{comp_lineno}: gamma must be in (0,1]")
            logits[j] = math.log(gamma)
        if "logsigma" in comp:
            log_scales[j] = float(comp["logsigma"])
        else:
            sigma = float(_require(comp, "sigma", source, comp_lineno))
            if sigma <= 0:
                raise LoadError(f"{source}:{comp_lineno}: sigma must be positive")
            log_scales[j] = math.log(sigma)
    for extra in lines[cursor:]:
        if extra.strip():
            raise LoadError(f"{source}:{cursor + 1}: trailing content {extra!r}")
    try:
        noise = NoiseParams(logits, offsets, log_scales)
    except ValueError as exc:
        raise LoadError(f"{source}: {exc}") from None
    return ModelParams(classifier, count, noise)
