"""Recurrence lower bounds for models trained on disjoint i.i.d. samples and
Monte Carlo estimates to check them against.

With ``q = sigma2 / (b * delta**2)`` clamped to ``[0, 1]`` and ``p = 1 - q``,
the probability that at least ``k`` of ``m`` models land in a common ball
after ``T`` epochs is bounded below by

    (sum_{r=k}^{m} C(m, r) p**r q**(m - r)) ** T.

``k = 2`` is the pair-recurrence bound and ``k = m`` reduces to
``(p**m) ** T``. When ``sigma2 > b * delta**2`` the Markov step is vacuous
and the clamped bound is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ensemble import bucket_models, derive_seed, generate_subsamples, train_on_subsamples
from .nn import Architecture, ModelParams, TrainConfig, init_model, per_example_grads

__all__ = [
    "BoundInputs",
    "RecurrenceEstimate",
    "bound_pair_recurrence",
    "bound_all_recurrence",
    "bound_k_anonymity",
    "gradient_covariance_trace",
    "estimate_sigma2",
    "recurrence_sweep",
    "monte_carlo_recurrence",
]


@dataclass(frozen=True)
class BoundInputs:
    m: int
    b: int
    T: int
    delta: float
    sigma2: float
    k: int = 2

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("recurrence needs at least two models (m >= 2)")
        if self.b < 1 or self.T < 1:
            raise ValueError("b and T must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")

    @property
    def q_raw(self) -> float:
        return self.sigma2 / (self.b * self.delta**2)

    @property
    def q(self) -> float:
        return min(1.0, max(0.0, self.q_raw))

    @property
    def vacuous(self) -> bool:
        return self.q_raw >= 1.0


def _tail(m: int, k: int, p: float, q: float) -> float:
    return math.fsum(math.comb(m, r) * p**r * q ** (m - r) for r in range(k, m + 1))


def bound_k_anonymity(inp: BoundInputs, k: Optional[int] = None) -> float:
    k = inp.k if k is None else k
    if not 2 <= k <= inp.m:
        raise ValueError(f"k must lie in [2, m={inp.m}], got {k}")
    q = inp.q
    value = _tail(inp.m, k, 1.0 - q, q) ** inp.T
    return min(1.0, max(0.0, value))


def bound_pair_recurrence(inp: BoundInputs) -> float:
    return bound_k_anonymity(inp, 2)


def bound_all_recurrence(inp: BoundInputs) -> float:
    return min(1.0, max(0.0, ((1.0 - inp.q) ** inp.m) ** inp.T))


def gradient_covariance_trace(grads) -> float:
    """Sum of per-coordinate variances (n divisor) of a stack of gradients."""
    g = np.asarray(grads, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 2:
        raise ValueError("need at least two gradient vectors")
    return float(np.var(g, axis=0).sum())


def estimate_sigma2(X, y, model: ModelParams, batch_size: int) -> float:
    """Trace of the per-example gradient covariance at ``model``.

    The data must cover at least two minibatches of ``batch_size``.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) < 2 * batch_size or len(X) < 2:
        raise ValueError(
            f"{len(X)} examples do not make two minibatches of {batch_size}"
        )
    return gradient_covariance_trace(per_example_grads(model, X, y))


@dataclass
class RecurrenceEstimate:
    trials: int
    recur_freq: float
    bound: float
    delta: float
    m: int
    k: int = 2
    k_freq: float = 0.0
    k_bound: float = 0.0
    sigma2: float = 0.0
    q_raw: float = 0.0
    bucket_sizes: list[list[int]] = field(default_factory=list)

    @property
    def standard_error(self) -> float:
        """Binomial standard error at the bound (the null recurrence rate)."""
        return math.sqrt(self.bound * (1.0 - self.bound) / self.trials)


def recurrence_sweep(
    arch: Architecture,
    X,
    y,
    m: int,
    N: int,
    deltas: Sequence[float],
    train_cfg: TrainConfig,
    trials: int,
    seed: int,
    k: int = 2,
    init_count: int = 1,
) -> list[RecurrenceEstimate]:
    """Monte Carlo recurrence frequency for several Delta on shared trials.

    Each trial draws fresh disjoint subsamples and trains ``m`` models from
    the same initialization; the trained set is then bucketed at every
    ``delta``. A trial counts as a recurrence when the largest bucket holds
    at least two models (and, for ``k_freq``, at least ``k``).
    """
    if m < 2:
        raise ValueError("pair recurrence needs m >= 2")
    if trials < 1:
        raise ValueError("trials must be positive")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    start = init_model(arch, seed)
    sigma2 = estimate_sigma2(X, y, start, train_cfg.batch_size)
    b = train_cfg.batches_per_epoch(N)

    sizes: dict[float, list[list[int]]] = {d: [] for d in deltas}
    for t in range(trials):
        trial_seed = derive_seed(seed, t)
        subs = generate_subsamples(len(X), N, m, trial_seed)
        models = train_on_subsamples(X, y, arch, train_cfg, subs, seed, init_count)
        for d in deltas:
            sizes[d].append([bk.k for bk in bucket_models(models, d)])

    out = []
    for d in deltas:
        inp = BoundInputs(m=m, b=b, T=train_cfg.epochs, delta=d, sigma2=sigma2, k=max(2, min(k, m)))
        largest = np.array([s[0] for s in sizes[d]])
        out.append(
            RecurrenceEstimate(
                trials=trials,
                recur_freq=float(np.mean(largest >= 2)),
                bound=bound_pair_recurrence(inp),
                delta=d,
                m=m,
                k=inp.k,
                k_freq=float(np.mean(largest >= inp.k)),
                k_bound=bound_k_anonymity(inp),
                sigma2=sigma2,
                q_raw=inp.q_raw,
                bucket_sizes=sizes[d],
            )
        )
    return out


def monte_carlo_recurrence(
    arch: Architecture,
    X,
    y,
    m: int,
    N: int,
    delta: float,
    train_cfg: TrainConfig,
    trials: int,
    seed: int,
    k: int = 2,
) -> RecurrenceEstimate:
    (est,) = recurrence_sweep(arch, X, y, m, N, [delta], train_cfg, trials, seed, k)
    return est
