"""Ensembles of Delta-integrally-private models.

Models trained from one shared initialization on pairwise-disjoint
subsamples are grouped into buckets of Delta-close parameters; the mean of
each of the k largest buckets is released. A bucket of size k means k
disjoint datasets generate (up to Delta) the same model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .nn import Architecture, ModelParams, TrainConfig, init_model, mean_models, model_distance, train_many

__all__ = [
    "InsufficientDataError",
    "SubsampleSet",
    "Bucket",
    "Ensemble",
    "KAnonymityReport",
    "generate_subsamples",
    "bucket_models",
    "train_on_subsamples",
    "build_ensemble",
    "kanonymity_report",
    "derive_seed",
    "max_bucket_size",
]

log = logging.getLogger(__name__)

_SUBSAMPLE_STREAM = 7_777
_INIT_STREAM = 1_000_003


class InsufficientDataError(ValueError):
    pass


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed for the stream identified by ``parts``."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass
class SubsampleSet:
    subsamples: list[np.ndarray]
    size: int
    seed: int

    def __len__(self) -> int:
        return len(self.subsamples)

    def as_matrix(self) -> np.ndarray:
        return np.stack(self.subsamples)

    def pairwise_disjoint(self) -> bool:
        joined = np.concatenate(self.subsamples) if self.subsamples else np.empty(0)
        return len(np.unique(joined)) == len(joined)


def generate_subsamples(pool_size: int, N: int, m: int, seed: int) -> SubsampleSet:
    """``m`` disjoint index sets of size ``N`` from a seeded shuffle of the pool."""
    if N < 1 or m < 1:
        raise ValueError("N and m must be positive")
    if m * N > pool_size:
        raise InsufficientDataError(
            f"{m} disjoint subsamples of {N} need {m * N} records, pool has {pool_size}"
        )
    perm = np.random.default_rng(seed).permutation(pool_size)
    return SubsampleSet([perm[i * N : (i + 1) * N] for i in range(m)], N, seed)


@dataclass
class Bucket:
    representative: ModelParams
    members: list[ModelParams] = field(default_factory=list)
    source_subsample_ids: list[int] = field(default_factory=list)
    created: int = 0

    @property
    def k(self) -> int:
        return len(self.members)

    def mean(self) -> ModelParams:
        return mean_models(self.members)


def bucket_models(
    models: Sequence[ModelParams], delta: float, source_ids: Optional[Sequence[int]] = None
) -> list[Bucket]:
    """Greedy first-fit grouping against each bucket's first model.

    Models are visited in input order; each joins the first bucket whose
    representative lies within ``delta`` and otherwise starts a new bucket.
    Buckets come back largest first, ties in creation order.
    """
    if len(models) == 0:
        raise ValueError("no models to bucket")
    if source_ids is None:
        source_ids = range(len(models))
    if len(source_ids) != len(models):
        raise ValueError("need one source id per model")
    buckets: list[Bucket] = []
    for model, sid in zip(models, source_ids):
        for bucket in buckets:
            if model_distance(model, bucket.representative) <= delta:
                bucket.members.append(model)
                bucket.source_subsample_ids.append(int(sid))
                break
        else:
            buckets.append(Bucket(model, [model], [int(sid)], created=len(buckets)))
    return sorted(buckets, key=lambda b: (-b.k, b.created))


@dataclass
class Ensemble:
    members: list[ModelParams]
    bucket_sizes: list[int]
    delta: float
    requested_k: int
    effective_k: int
    warning: Optional[str] = None
    subsamples: Optional[SubsampleSet] = None

    def __len__(self) -> int:
        return len(self.members)


def train_on_subsamples(
    X,
    y,
    arch: Architecture,
    train_cfg: TrainConfig,
    subsamples: SubsampleSet,
    seed: int,
    init_count: int = 1,
) -> list[ModelParams]:
    """One model per subsample.

    With ``init_count == 1`` every model starts from ``init_model(arch,
    seed)``; otherwise model ``i`` uses initialization ``i % init_count``.
    Model ``i`` shuffles with a seed derived from ``(seed, i)``.
    """
    if init_count < 1:
        raise ValueError("init_count must be positive")
    if init_count == 1:
        inits = [init_model(arch, seed)]
    else:
        inits = [init_model(arch, derive_seed(seed, _INIT_STREAM, j)) for j in range(init_count)]
    starts = [inits[i % init_count] for i in range(len(subsamples))]
    shuffle_seeds = [derive_seed(seed, i) for i in range(len(subsamples))]
    return train_many(starts, X, y, subsamples.as_matrix(), train_cfg, shuffle_seeds)


def _select(buckets: list[Bucket], delta: float, k: int, subsamples=None) -> Ensemble:
    top = buckets[:k]
    warning = None
    if len(top) < k:
        warning = f"only {len(top)} buckets formed, fewer than the requested k={k}"
        log.warning(warning)
    return Ensemble(
        members=[b.mean() for b in top],
        bucket_sizes=[b.k for b in top],
        delta=delta,
        requested_k=k,
        effective_k=len(top),
        warning=warning,
        subsamples=subsamples,
    )


def build_ensemble(
    X,
    y,
    arch: Architecture,
    train_cfg: TrainConfig,
    N: Optional[int],
    m: int,
    delta: float,
    k: int,
    seed: int,
    init_count: int = 1,
) -> tuple[Ensemble, list[Bucket]]:
    """Train ``m`` models on disjoint subsamples, bucket them, keep top ``k``.

    ``N=None`` uses ``floor(len(X) / m)`` records per subsample.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    X = np.asarray(X, dtype=np.float64)
    if N is None:
        N = len(X) // m
    subsamples = generate_subsamples(len(X), N, m, derive_seed(seed, _SUBSAMPLE_STREAM))
    models = train_on_subsamples(X, y, arch, train_cfg, subsamples, seed, init_count)
    buckets = bucket_models(models, delta)
    return _select(buckets, delta, k, subsamples), buckets


@dataclass
class KAnonymityReport:
    sizes: list[int]
    k: int
    disjoint: bool


def kanonymity_report(buckets: Sequence[Bucket], subsamples: Optional[SubsampleSet] = None) -> KAnonymityReport:
    """Bucket sizes and the achieved k (largest bucket).

    ``disjoint`` confirms that no source subsample id repeats across or within
    buckets and, when ``subsamples`` is given, that the index sets behind
    them share no record.
    """
    if len(buckets) == 0:
        raise ValueError("no buckets")
    ids = [sid for b in buckets for sid in b.source_subsample_ids]
    disjoint = len(ids) == len(set(ids))
    if subsamples is not None:
        disjoint = disjoint and subsamples.pairwise_disjoint()
    sizes = [b.k for b in buckets]
    return KAnonymityReport(sizes, max(sizes), disjoint)


def max_bucket_size(models: Sequence[ModelParams], delta: float) -> int:
    return bucket_models(models, delta)[0].k

