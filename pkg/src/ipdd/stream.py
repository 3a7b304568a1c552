"""Prequential stream runs: the IPDD loop and its comparison baselines.

Every method predicts each 2% chunk with its current model(s) before any
retraining, so all reported metrics are test-then-train. Label access goes
through :meth:`StreamChunk.request_labels` and is counted.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .datasets import LabeledDataset, StreamChunk, chunk_stream
from .detector import Adwin, predictive_entropy
from .ensemble import Ensemble, build_ensemble, derive_seed
from .nn import Architecture, ModelParams, TrainConfig, forward, init_model, train_many

__all__ = [
    "METHODS",
    "StreamConfig",
    "TrainingWindow",
    "DriftEvent",
    "RunResult",
    "RetrainError",
    "ensemble_predict",
    "member_probabilities",
    "dp_noise_std",
    "dp_train",
    "dp_train_many",
    "run_ipdd",
    "run_baseline",
    "run_method",
    "parse_method",
]

METHODS = ("ipdd", "no_retrain", "adwin_unlim", "adwin_lim", "dp")


class RetrainError(RuntimeError):
    pass


@dataclass(frozen=True)
class StreamConfig:
    arch: str = "ann"
    train: TrainConfig = TrainConfig()
    delta: float = 0.01
    adwin_delta: float = 0.001
    m: int = 25
    N: Optional[int] = None
    k: int = 5
    init_count: int = 1
    window_capacity: Optional[int] = None
    init_frac: float = 0.10
    chunk_frac: float = 0.02
    seed: int = 0
    dp_clip: float = 1.0
    dp_delta: float = 1e-5

    def architecture(self, ds: LabeledDataset) -> Architecture:
        return Architecture.named(self.arch, ds.n_features, ds.num_classes)


class TrainingWindow:
    """Bounded FIFO buffer of labelled records; oldest records leave first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._x: deque = deque()
        self._y: deque = deque()
        self.appended = 0

    def __len__(self) -> int:
        return len(self._x)

    def extend(self, X, y) -> None:
        for row, label in zip(np.asarray(X), np.asarray(y)):
            if len(self._x) == self.capacity:
                self._x.popleft()
                self._y.popleft()
            self._x.append(row)
            self._y.append(int(label))
            self.appended += 1

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self._x, dtype=np.float64), np.array(self._y, dtype=np.intp)


@dataclass
class DriftEvent:
    chunk_index: int
    instance_index: int
    detector_width_before: int
    labels_requested: int


@dataclass
class RunResult:
    method: str
    arch: str
    seed: int
    predictions: np.ndarray
    probabilities: np.ndarray
    labels: np.ndarray
    uncertainty: np.ndarray
    chunk_starts: list[int]
    chunk_sizes: list[int]
    drift_events: list[DriftEvent] = field(default_factory=list)
    label_requests: int = 0
    retrain_count: int = 0
    ensemble_sizes: list[int] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def drift_count(self) -> int:
        return len(self.drift_events)

    def chunk_slices(self):
        offset = 0
        for size in self.chunk_sizes:
            yield slice(offset, offset + size)
            offset += size

    def chunk_accuracy(self) -> np.ndarray:
        hits = self.predictions == self.labels
        return np.array([hits[s].mean() for s in self.chunk_slices()])


def member_probabilities(members: Sequence[ModelParams], X) -> np.ndarray:
    """Stacked member outputs, shape ``(members, n, classes)``."""
    if len(members) == 0:
        raise ValueError("empty ensemble")
    return np.stack([forward(m, X) for m in members])


def ensemble_predict(ensemble: Ensemble | Sequence[ModelParams], x) -> tuple[int, np.ndarray]:
    """Majority-by-mean class for one instance and each member's output.

    Ties go to the lowest class id.
    """
    members = ensemble.members if isinstance(ensemble, Ensemble) else list(ensemble)
    probs = member_probabilities(members, np.asarray(x, dtype=np.float64)[None, :])[:, 0, :]
    return int(np.argmax(probs.mean(axis=0))), probs


def dp_noise_std(epsilon: float, clip: float = 1.0, dp_delta: float = 1e-5) -> float:
    """Gaussian-mechanism noise scale ``clip * sqrt(2 ln(1.25 / dp_delta)) / epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return clip * math.sqrt(2.0 * math.log(1.25 / dp_delta)) / epsilon


def _clip_and_noise(epsilon: float, clip: float, dp_delta: float, seeds: Sequence[int]):
    sigma = dp_noise_std(epsilon, clip, dp_delta)
    rngs = [np.random.default_rng(s) for s in seeds]

    def transform(gw, gb):
        # per model: clip the whole minibatch-mean gradient, then add noise
        sq = sum((g.reshape(len(g), -1) ** 2).sum(axis=1) for g in gw + gb)
        scale = np.minimum(1.0, clip / np.maximum(np.sqrt(sq), 1e-300))
        out_w = [g * scale[:, None, None] for g in gw]
        out_b = [g * scale[:, None] for g in gb]
        for j, rng in enumerate(rngs):
            for g in out_w + out_b:
                g[j] += rng.normal(0.0, sigma, size=g[j].shape)
        return out_w, out_b

    return transform


def dp_train_many(
    models: Sequence[ModelParams],
    X,
    y,
    index_sets,
    cfg: TrainConfig,
    shuffle_seeds: Sequence[int],
    noise_seeds: Sequence[int],
    epsilon: float,
    clip: float = 1.0,
    dp_delta: float = 1e-5,
) -> list[ModelParams]:
    transform = _clip_and_noise(epsilon, clip, dp_delta, noise_seeds)
    return train_many(models, X, y, index_sets, cfg, shuffle_seeds, transform)


def dp_train(
    model: ModelParams,
    X,
    y,
    cfg: TrainConfig,
    epsilon: float,
    noise_seed: int = 0,
    clip: float = 1.0,
    dp_delta: float = 1e-5,
) -> ModelParams:
    """SGD whose every minibatch gradient is L2-clipped to ``clip`` and then
    perturbed with spherical Gaussian noise of std :func:`dp_noise_std`.

    No privacy accounting is done; this is a comparison baseline.
    """
    X = np.asarray(X, dtype=np.float64)
    (out,) = dp_train_many(
        [model], X, y, np.arange(len(X))[None, :], cfg, [cfg.shuffle_seed], [noise_seed],
        epsilon, clip, dp_delta,
    )
    return out


def parse_method(name: str) -> tuple[str, Optional[float]]:
    """``"dp(0.5)"`` -> ``("dp", 0.5)``; other names pass through."""
    name = name.strip().lower()
    if name.startswith("dp(") and name.endswith(")"):
        return "dp", float(name[3:-1])
    if name not in METHODS or name == "dp":
        raise ValueError(f"unknown method {name!r}")
    return name, None


# --- model builders: (X, y, rebuild_index) -> list of members -------------


def _ipdd_builder(cfg: StreamConfig, arch: Architecture):
    def build(X, y, rebuild):
        ens, _ = build_ensemble(
            X, y, arch, cfg.train, cfg.N, cfg.m, cfg.delta, cfg.k,
            seed=derive_seed(cfg.seed, rebuild), init_count=cfg.init_count,
        )
        return ens.members

    return build


def _single_builder(cfg: StreamConfig, arch: Architecture):
    def build(X, y, rebuild):
        seed = derive_seed(cfg.seed, rebuild)
        start = init_model(arch, seed)
        (model,) = train_many([start], X, y, np.arange(len(X))[None, :], cfg.train, [seed])
        return [model]

    return build


def _deep_ensemble_builder(cfg: StreamConfig, arch: Architecture, epsilon: Optional[float]):
    def build(X, y, rebuild):
        seeds = [derive_seed(cfg.seed, rebuild, j) for j in range(cfg.k)]
        starts = [init_model(arch, s) for s in seeds]
        index_sets = np.broadcast_to(np.arange(len(X)), (cfg.k, len(X)))
        if epsilon is None:
            return train_many(starts, X, y, index_sets, cfg.train, seeds)
        noise = [derive_seed(s, 99) for s in seeds]
        return dp_train_many(
            starts, X, y, index_sets, cfg.train, seeds, noise, epsilon, cfg.dp_clip, cfg.dp_delta
        )

    return build


def _run(
    method: str,
    ds: LabeledDataset,
    cfg: StreamConfig,
    build: Callable,
    signal: Optional[str],
) -> RunResult:
    started = time.perf_counter()
    initial, chunks = chunk_stream(ds, cfg.init_frac, cfg.chunk_frac)
    if not chunks:
        raise ValueError("stream has no chunks after the initial training prefix")
    capacity = cfg.window_capacity or 2 * len(initial)
    window = TrainingWindow(capacity)
    window.extend(initial.features, initial.labels)

    rebuilds = 0
    members = build(*window.arrays(), rebuilds)
    detector = Adwin(cfg.adwin_delta) if signal else None

    preds, probs_out, truth, unc = [], [], [], []
    events: list[DriftEvent] = []
    sizes = [len(members)]
    for chunk in chunks:
        member_probs = member_probabilities(members, chunk.features)
        mean = member_probs.mean(axis=0)
        preds.append(np.argmax(mean, axis=1))
        probs_out.append(mean)
        truth.append(chunk.labels_for_scoring())
        entropy = predictive_entropy(member_probs)
        unc.append(entropy)
        if detector is None:
            continue

        labels = None
        if signal == "error":
            labels = chunk.request_labels()
            values = (preds[-1] != labels).astype(np.float64)
        else:
            values = entropy
        fired_at = None
        width_before = 0
        for i, v in enumerate(values):
            width_before = detector.width
            if detector.update(v):
                fired_at = i
                break
        if fired_at is None:
            continue

        if labels is None:
            labels = chunk.request_labels()
        events.append(DriftEvent(chunk.chunk_index, chunk.start + fired_at, width_before, len(chunk)))
        window.extend(chunk.features, labels)
        rebuilds += 1
        try:
            members = build(*window.arrays(), rebuilds)
        except Exception as exc:  # noqa: BLE001 - re-raised with stream position
            raise RetrainError(
                f"{method}: retraining after drift in chunk {chunk.chunk_index} failed: {exc}"
            ) from exc
        sizes.append(len(members))
        detector = Adwin(cfg.adwin_delta)

    return RunResult(
        method=method,
        arch=cfg.arch,
        seed=cfg.seed,
        predictions=np.concatenate(preds),
        probabilities=np.concatenate(probs_out),
        labels=np.concatenate(truth),
        uncertainty=np.concatenate(unc),
        chunk_starts=[c.start for c in chunks],
        chunk_sizes=[len(c) for c in chunks],
        drift_events=events,
        label_requests=sum(c.labels_released for c in chunks),
        retrain_count=rebuilds,
        ensemble_sizes=sizes,
        wall_time=time.perf_counter() - started,
    )


def run_ipdd(ds: LabeledDataset, cfg: StreamConfig) -> RunResult:
    """Integrally private drift detection over a chunked stream.

    The initial prefix trains an ensemble of bucket-mean models; each
    instance's predictive entropy feeds ADWIN, and a detection requests the
    chunk's labels, appends them to the FIFO training window, rebuilds the
    ensemble and resets the detector.
    """
    arch = cfg.architecture(ds)
    return _run("ipdd", ds, cfg, _ipdd_builder(cfg, arch), "entropy")


def run_baseline(kind: str, ds: LabeledDataset, cfg: StreamConfig, epsilon: Optional[float] = None) -> RunResult:
    """Run a comparison pipeline.

    ``no_retrain`` trains one model once. ``adwin_unlim`` sees every label
    and feeds the 0/1 error to ADWIN. ``adwin_lim`` and ``dp`` use a k-member
    ensemble with distinct initializations and the entropy signal; ``dp``
    trains each member with :func:`dp_train` at ``epsilon``.
    """
    arch = cfg.architecture(ds)
    if kind == "no_retrain":
        return _run(kind, ds, cfg, _single_builder(cfg, arch), None)
    if kind == "adwin_unlim":
        return _run(kind, ds, cfg, _single_builder(cfg, arch), "error")
    if kind == "adwin_lim":
        return _run(kind, ds, cfg, _deep_ensemble_builder(cfg, arch, None), "entropy")
    if kind == "dp":
        if epsilon is None:
            raise ValueError("the dp baseline needs epsilon")
        return _run(f"dp({float(epsilon)!r})", ds, cfg, _deep_ensemble_builder(cfg, arch, epsilon), "entropy")
    raise ValueError(f"unknown baseline {kind!r}")


def run_method(name: str, ds: LabeledDataset, cfg: StreamConfig) -> RunResult:
    """Dispatch on a method name such as ``ipdd``, ``adwin_lim`` or ``dp(0.1)``."""
    kind, epsilon = parse_method(name)
    if kind == "ipdd":
        return run_ipdd(ds, cfg)
    return run_baseline(kind, ds, cfg, epsilon)


def with_seed(cfg: StreamConfig, seed: int) -> StreamConfig:
    return replace(cfg, seed=seed)
