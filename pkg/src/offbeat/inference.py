"""Exact inference over event-mark alignments by log-space dynamic programming.

The generative story per session: each of the L instances draws a latent
label y_i from the classifier, emits a count o_i of event marks from the
count model, and each emitted mark's recorded time is drawn from the noise
density around t_i.  Marks from a later instance land after marks from an
earlier one (non-crossing), so given counts, the sorted mark list decomposes
into contiguous blocks, one block per instance.

This module computes, exactly and in O(L * M * C) time for counts up to C:

* the marginal likelihood of the observed mark times (labels and counts
  summed out),
* the posterior over each instance's label,
* the posterior that mark m was emitted by instance i,
* the joint posterior over each instance's (count, label).

Conventions.  ``log_a[i, l]`` (shape (L+1, M+1)) is the log marginal
probability that instances 1..i emitted exactly the first l marks at their
observed times; ``log_a[0, 0] = 0``.  ``log_b[i, l]`` (shape (L+2, M+2),
1-based in both axes) is the log marginal probability that instances i..L
emitted marks l..M; ``log_b[L+1, M+1] = 0``.  Row and column 0 of ``log_b``
are unused padding.  The two recursions share the same per-cell incremental
block sums, which keeps ``log_a[L, M]`` and ``log_b[1, 1]`` equal to within
accumulated rounding even for very sharp noise densities.

A session with more marks than ``L * C`` has no feasible alignment; its log
marginal is exactly ``-inf`` (empty support, not an error).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .classifiers import log_prob_batch, predict_prob_batch
from .data import Session
from .model import ModelParams
from .observation import count_log_prob_table, noise_log_density_matrix

try:  # pragma: no cover - exercised implicitly by every inference call
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


__all__ = [
    "PosteriorTables",
    "forward",
    "backward",
    "compute_tables",
    "log_marginal_likelihood",
    "posterior_label_marginals",
    "posterior_assignment_marginals",
    "posterior_count_marginals",
    "enumerate_joint",
    "EnumerationResult",
]

_NEG_INF = -np.inf


@_njit(cache=True)
def _logaddexp(a: float, b: float) -> float:
    if a == _NEG_INF:
        return b
    if b == _NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@_njit(cache=True)
def _forward_kernel(log_emit: np.ndarray, log_nd: np.ndarray, max_count: int) -> np.ndarray:
    L = log_emit.shape[0]
    M = log_nd.shape[1]
    log_a = np.full((L + 1, M + 1), _NEG_INF)
    log_a[0, 0] = 0.0
    for i in range(1, L + 1):
        for l in range(M + 1):
            top = min(max_count, l)
            acc = _NEG_INF
            block = 0.0
            for c in range(top + 1):
                if c > 0:
                    block += log_nd[i - 1, l - c]
                acc = _logaddexp(acc, log_emit[i - 1, c] + log_a[i - 1, l - c] + block)
            log_a[i, l] = acc
    return log_a


@_njit(cache=True)
def _backward_kernel(log_emit: np.ndarray, log_nd: np.ndarray, max_count: int) -> np.ndarray:
    L = log_emit.shape[0]
    M = log_nd.shape[1]
    log_b = np.full((L + 2, M + 2), _NEG_INF)
    log_b[L + 1, M + 1] = 0.0
    for i in range(L, 0, -1):
        for l in range(M + 1, 0, -1):
            top = min(max_count, M + 1 - l)
            acc = _NEG_INF
            block = 0.0
            for c in range(top + 1):
                if c > 0:
                    block += log_nd[i - 1, l + c - 2]
                acc = _logaddexp(acc, log_emit[i - 1, c] + log_b[i + 1, l + c] + block)
            log_b[i, l] = acc
    return log_b


def warm_up() -> None:
    """Compile the kernels on a tiny input (first call otherwise pays it)."""
    emit = np.zeros((1, 2))
    nd = np.zeros((1, 1))
    _forward_kernel(emit, nd, 1)
    _backward_kernel(emit, nd, 1)


@dataclass(eq=False)
class PosteriorTables:
    """Forward/backward tables plus the cached per-instance log factors."""

    log_a: np.ndarray  # (L+1, M+1)
    log_b: np.ndarray  # (L+2, M+2)
    log_marginal: float
    log_py: np.ndarray  # (L, 2): log p(y | x_i)
    log_pc: np.ndarray  # (C+1, 2): log p(c | y)
    log_emit: np.ndarray  # (L, C+1): logsumexp_y of the two above
    log_nd: np.ndarray  # (L, M): log noise density of mark m around t_i

    @property
    def num_instances(self) -> int:
        return self.log_py.shape[0]

    @property
    def num_events(self) -> int:
        return self.log_nd.shape[1]

    @property
    def max_count(self) -> int:
        return self.log_pc.shape[0] - 1

    @property
    def feasible(self) -> bool:
        return self.log_marginal != _NEG_INF


def _session_factors(
    session: Session, params: ModelParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    log_py = log_prob_batch(params.classifier, session.features)
    log_pc = count_log_prob_table(params.count)
    log_emit = np.logaddexp(
        log_py[:, 0:1] + log_pc[None, :, 0], log_py[:, 1:2] + log_pc[None, :, 1]
    )
    log_nd = noise_log_density_matrix(
        params.noise, session.event_times, session.instance_times
    )
    return log_py, log_pc, np.ascontiguousarray(log_emit), np.ascontiguousarray(log_nd)


def forward(session: Session, params: ModelParams) -> np.ndarray:
    """The (L+1, M+1) log forward table for this session."""
    _, _, log_emit, log_nd = _session_factors(session, params)
    return _forward_kernel(log_emit, log_nd, params.count.max_count)


def backward(session: Session, params: ModelParams) -> np.ndarray:
    """The (L+2, M+2) log backward table for this session."""
    _, _, log_emit, log_nd = _session_factors(session, params)
    return _backward_kernel(log_emit, log_nd, params.count.max_count)


def log_marginal_likelihood(session: Session, params: ModelParams) -> float:
    """log p(marks | features, times); -inf when M > L * max_count."""
    _, _, log_emit, log_nd = _session_factors(session, params)
    log_a = _forward_kernel(log_emit, log_nd, params.count.max_count)
    return float(log_a[-1, -1])


def compute_tables(session: Session, params: ModelParams) -> PosteriorTables:
    """Run both recursions and cache every factor the marginals need."""
    max_count = params.count.max_count
    log_py, log_pc, log_emit, log_nd = _session_factors(session, params)
    log_a = _forward_kernel(log_emit, log_nd, max_count)
    log_b = _backward_kernel(log_emit, log_nd, max_count)
    return PosteriorTables(
        log_a=log_a,
        log_b=log_b,
        log_marginal=float(log_a[-1, -1]),
        log_py=log_py,
        log_pc=log_pc,
        log_emit=log_emit,
        log_nd=log_nd,
    )


def _block_sums(log_nd: np.ndarray, max_count: int) -> list[np.ndarray | None]:
    """blocks[c][i, j] = sum of log_nd[i, j..j+c-1]; blocks[0] unused."""
    L, M = log_nd.shape
    blocks: list[np.ndarray | None] = [None] * (max_count + 1)
    if max_count >= 1:
        blocks[1] = log_nd
    for c in range(2, max_count + 1):
        width = M - c + 1
        if width <= 0:
            blocks[c] = np.zeros((L, 0))
        else:
            blocks[c] = blocks[c - 1][:, :width] + log_nd[:, c - 1 :]
    return blocks


def _context_weights(tables: PosteriorTables) -> np.ndarray:
    """(L, C+1) log sums over alignments around instance i with count c.

    Entry (i, c) is the log of the summed probability of all complete
    alignments in which instance i emits exactly c marks, with instance i's
    own label/count factor divided out.  Multiplying back per-(y, c) factors
    and normalizing yields every per-instance marginal.
    """
    L, M, C = tables.num_instances, tables.num_events, tables.max_count
    log_a, log_b = tables.log_a, tables.log_b
    out = np.full((L, C + 1), _NEG_INF)
    # c = 0: straddle position l with no marks consumed.
    with np.errstate(invalid="ignore"):
        stay = log_a[0:L, :] + log_b[2 : L + 2, 1:]
        out[:, 0] = _lse_rows(stay)
        blocks = _block_sums(tables.log_nd, C)
        for c in range(1, C + 1):
            width = M - c + 1
            if width <= 0:
                continue
            span = (
                log_a[0:L, 0:width]
                + blocks[c]
                + log_b[2 : L + 2, c + 1 : M + 2]
            )
            out[:, c] = _lse_rows(span)
    return out


def _lse_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp that tolerates all -inf rows."""
    if x.shape[1] == 0:
        return np.full(x.shape[0], _NEG_INF)
    peak = np.max(x, axis=1)
    safe = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore"):
        out = safe + np.log(np.sum(np.exp(x - safe[:, None]), axis=1))
    return np.where(np.isfinite(peak), out, _NEG_INF)


def posterior_count_marginals(tables: PosteriorTables) -> np.ndarray:
    """(L, C+1, 2) joint posterior p(o_i = c, y_i = y | marks).

    Normalization divides each instance's row by its own total rather than
    by ``log_marginal``; the two are equal in exact arithmetic (every row
    total is the full marginal cut at instance i), but the ratio form lets
    the rounding that both share cancel, which keeps count conservation
    tight on long sessions.
    """
    if not tables.feasible:
        raise ValueError("posterior undefined: session has no feasible alignment")
    L = tables.num_instances
    context = _context_weights(tables)
    log_joint = (
        tables.log_py[:, None, :]
        + tables.log_pc[None, :, :]
        + context[:, :, None]
    )
    row_total = _lse_rows(log_joint.reshape(L, -1))
    return np.exp(log_joint - row_total[:, None, None])


def posterior_label_marginals(tables: PosteriorTables) -> np.ndarray:
    """(L,) posterior p(y_i = 1 | marks)."""
    return posterior_count_marginals(tables)[:, :, 1].sum(axis=1)


def posterior_assignment_marginals(tables: PosteriorTables) -> np.ndarray:
    """(L, M) posterior that mark m was emitted by instance i.

    Sums, for each count c >= 1 and each position of the mark inside the
    emitted block, the probability of all alignments placing that block.
    """
    if not tables.feasible:
        raise ValueError("posterior undefined: session has no feasible alignment")
    L, M, C = tables.num_instances, tables.num_events, tables.max_count
    out = np.zeros((L, M))
    if M == 0:
        return out
    blocks = _block_sums(tables.log_nd, C)
    log_a, log_b = tables.log_a, tables.log_b
    for c in range(1, C + 1):
        width = M - c + 1
        if width <= 0:
            continue
        span = np.exp(
            log_a[0:L, 0:width]
            + blocks[c]
            + log_b[2 : L + 2, c + 1 : M + 2]
            + tables.log_emit[:, c : c + 1]
            - tables.log_marginal
        )
        for pos in range(c):
            out[:, pos : pos + width] += span
    return out


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

ENUM_MAX_INSTANCES = 12
ENUM_MAX_EVENTS = 4


@dataclass(eq=False)
class EnumerationResult:
    log_marginal: float
    label: np.ndarray  # (L,) p(y_i = 1)
    assignment: np.ndarray  # (L, M)
    count_label: np.ndarray  # (L, C+1, 2)


def _compositions(total: int, parts: int, cap: int):
    """All tuples of ``parts`` ints in 0..cap summing to ``total``."""
    if parts == 1:
        if 0 <= total <= cap:
            yield (total,)
        return
    for head in range(min(cap, total) + 1):
        if total - head > (parts - 1) * cap:
            continue
        for rest in _compositions(total - head, parts - 1, cap):
            yield (head,) + rest


def enumerate_joint(session: Session, params: ModelParams) -> EnumerationResult:
    """Ground truth by exhaustive summation over labels and count vectors.

    Every quantity is recomputed from first principles (plain sigmoid,
    binomial pmf, Gaussian mixture pdf), independent of the dynamic program.
    The sum over label vectors exploits that, once the count vector is fixed,
    the joint factorizes per instance; this is plain algebra on Bernoulli
    products, not the alignment recursion under test.

    Underflow control: every composition assigns every mark exactly once, so
    dividing each mark's density column by its per-mark maximum scales all
    terms by one constant, which cancels in the marginals and is added back
    to the log marginal exactly.  Guards: L <= 12, M <= 4.
    """
    L, M = session.num_instances, session.num_events
    if L > ENUM_MAX_INSTANCES or M > ENUM_MAX_EVENTS:
        raise ValueError(
            f"enumeration guard: need L <= {ENUM_MAX_INSTANCES} and "
            f"M <= {ENUM_MAX_EVENTS}, got L={L}, M={M}"
        )
    C = params.count.max_count
    t = session.instance_times
    z = session.event_times

    # Independent per-instance class probabilities.
    p1 = np.clip(predict_prob_batch(params.classifier, session.features), 0.0, 1.0)
    p_y = np.stack([1.0 - p1, p1], axis=1)  # (L, 2)

    # Binomial count pmf per (c, y), same clamped probabilities as the model.
    pis = (params.count.pi0, params.count.pi1)
    pmf = np.empty((C + 1, 2))
    for c in range(C + 1):
        for y in (0, 1):
            pmf[c, y] = math.comb(C, c) * pis[y] ** c * (1.0 - pis[y]) ** (C - c)

    # Mixture log-pdf for every (instance, mark) pair, then scale each mark
    # column so its best instance has density 1.
    gammas = params.noise.weights
    mus = params.noise.offsets
    sigmas = params.noise.scales
    log_pdf = np.full((L, M), _NEG_INF)
    for i in range(L):
        for m in range(M):
            comps = [
                math.log(gammas[k])
                - math.log(sigmas[k])
                - 0.5 * math.log(2.0 * math.pi)
                - 0.5 * ((z[m] - t[i] - mus[k]) / sigmas[k]) ** 2
                for k in range(params.noise.num_components)
            ]
            peak = max(comps)
            log_pdf[i, m] = peak + math.log(
                math.fsum(math.exp(v - peak) for v in comps)
            )
    col_scale = log_pdf.max(axis=0) if M else np.zeros(0)
    log_scale = math.fsum(col_scale)
    pdf = np.exp(log_pdf - col_scale[None, :]) if M else np.zeros((L, 0))

    total_terms: list[float] = []
    label_terms: list[list[float]] = [[] for _ in range(L)]
    assign_terms: list[list[list[float]]] = [[[] for _ in range(M)] for _ in range(L)]
    joint_terms: list[list[list[list[float]]]] = [
        [[[] for _ in range(2)] for _ in range(C + 1)] for _ in range(L)
    ]

    for counts in _compositions(M, L, C):
        density = 1.0
        offset = 0
        spans = []
        for i, c in enumerate(counts):
            for m in range(offset, offset + c):
                density *= pdf[i, m]
            spans.append((offset, offset + c))
            offset += c
        # Label sum factorizes: s_i = sum_y p(y|x_i) p(o_i|y).
        u = p_y * pmf[np.array(counts), :]  # (L, 2)
        s = u.sum(axis=1)
        prefix = np.concatenate([[1.0], np.cumprod(s)])
        suffix = np.concatenate([np.cumprod(s[::-1])[::-1], [1.0]])
        all_prod = prefix[L]
        total_terms.append(density * all_prod)
        for i in range(L):
            others = prefix[i] * suffix[i + 1]
            weight1 = density * u[i, 1] * others
            label_terms[i].append(weight1)
            joint_terms[i][counts[i]][0].append(density * u[i, 0] * others)
            joint_terms[i][counts[i]][1].append(weight1)
            lo, hi = spans[i]
            for m in range(lo, hi):
                assign_terms[i][m].append(density * all_prod)

    total = math.fsum(total_terms)
    if total <= 0.0:
        if M <= L * C:
            raise FloatingPointError(
                "enumeration underflow: feasible session but all scaled terms "
                "vanished; inputs are outside the oracle's representable range"
            )
        return EnumerationResult(
            log_marginal=_NEG_INF,
            label=np.full(L, np.nan),
            assignment=np.full((L, M), np.nan),
            count_label=np.full((L, C + 1, 2), np.nan),
        )
    label = np.array([math.fsum(terms) / total for terms in label_terms])
    assignment = np.array(
        [[math.fsum(assign_terms[i][m]) / total for m in range(M)] for i in range(L)]
    )
    count_label = np.array(
        [
            [[math.fsum(joint_terms[i][c][y]) / total for y in (0, 1)] for c in range(C + 1)]
            for i in range(L)
        ]
    )
    return EnumerationResult(
        log_marginal=math.log(total) + log_scale,
        label=label,
        assignment=assignment,
        count_label=count_label,
    )
