"""Synthetic drifting streams, CSV ingestion and stream chunking."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "LabeledDataset",
    "DriftSpec",
    "CsvSchema",
    "StreamChunk",
    "EmptyDatasetError",
    "gen_sine",
    "sine_rule",
    "blobs",
    "load_csv",
    "write_csv",
    "chunk_stream",
]

DRIFT_KINDS = ("none", "abrupt", "gradual", "incremental")


class EmptyDatasetError(ValueError):
    pass


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    feature_names: list[str] = field(default_factory=list)
    class_names: Optional[list[str]] = None
    # per-column (min, max) used for scaling, when the data came from a CSV
    scaling: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if not self.feature_names:
            self.feature_names = [f"x{i + 1}" for i in range(self.features.shape[1])]

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "LabeledDataset":
        return LabeledDataset(
            self.features[rows],
            self.labels[rows],
            self.num_classes,
            list(self.feature_names),
            self.class_names,
            self.scaling,
        )


@dataclass(frozen=True)
class DriftSpec:
    """Where and how the concept changes.

    Every position toggles the concept once: ``abrupt`` switches at the
    position, ``gradual`` draws each instance from the new concept with a
    probability ramping 0 to 1 over ``transition_length`` instances, and
    ``incremental`` rotates the decision boundary smoothly over the same span.

    ``feature_shift`` additionally translates all features by that amount
    once a drift has taken effect, so the change is visible without labels.
    """

    kind: str = "none"
    positions: tuple[int, ...] = ()
    transition_length: int = 1
    feature_shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(int(p) for p in self.positions))
        if self.kind not in DRIFT_KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}; expected one of {DRIFT_KINDS}")
        if self.kind == "none" and self.positions:
            raise ValueError("drift kind 'none' takes no positions")
        if self.kind != "none" and not self.positions:
            raise ValueError(f"drift kind {self.kind!r} needs at least one position")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("drift positions must be strictly increasing")
        if self.positions and self.positions[0] < 0:
            raise ValueError("drift positions must be non-negative")
        if self.transition_length < 1:
            raise ValueError("transition_length must be >= 1")

    def ramp(self, t: np.ndarray, position: int) -> np.ndarray:
        """Share of the new concept at instance indices ``t``."""
        if self.kind == "abrupt":
            return (t >= position).astype(np.float64)
        return np.clip((t - position) / self.transition_length, 0.0, 1.0)


def sine_rule(x: np.ndarray, phase: np.ndarray | float = 0.0) -> np.ndarray:
    """Base Sine concept: class 1 iff ``x2 < sin(pi * x1 + phase)``."""
    x = np.atleast_2d(x)
    return (x[:, 1] < np.sin(np.pi * x[:, 0] + phase)).astype(np.intp)


def gen_sine(n: int, drift: DriftSpec = DriftSpec(), seed: int = 0) -> LabeledDataset:
    """Four Uniform(0, 1) attributes, the last two irrelevant, two classes."""
    if n <= 0:
        raise ValueError("n must be positive")
    if drift.positions and drift.positions[-1] >= n:
        raise ValueError(f"drift position {drift.positions[-1]} is outside a stream of {n}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, 4))
    t = np.arange(n)
    flips = np.zeros(n, dtype=np.intp)
    phase = np.zeros(n)
    shift = np.zeros(n)
    for pos in drift.positions:
        share = drift.ramp(t, pos)
        if drift.kind == "abrupt":
            flips += share.astype(np.intp)
        elif drift.kind == "gradual":
            flips += (rng.uniform(size=n) < share).astype(np.intp)
        else:
            phase += 0.5 * np.pi * share
        shift += drift.feature_shift * share
    X += shift[:, None]
    y = sine_rule(X, phase) ^ (flips % 2)
    return LabeledDataset(X, y, 2, ["x1", "x2", "x3", "x4"])


def blobs(n: int, seed: int = 0, separation: float = 2.0, dim: int = 2) -> LabeledDataset:
    """Two unit-variance Gaussian classes centred at -separation and +separation
    on every axis, classes alternating."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    centres = np.where(y[:, None] == 1, separation, -separation)
    X = centres + rng.standard_normal((n, dim))
    return LabeledDataset(X, y, 2)


@dataclass(frozen=True)
class CsvSchema:
    label_column: str
    class_count: Optional[int] = None
    delimiter: str = ","
    classes: Optional[tuple[str, ...]] = None
    scale_prefix: float = 0.10


def _label_order(values: Sequence[str]) -> list[str]:
    uniq = set(values)
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return sorted(uniq)


def load_csv(path, schema: CsvSchema) -> LabeledDataset:
    """Read a headed CSV, map labels to dense ids and min-max scale features.

    Scaling statistics come from the first ``schema.scale_prefix`` share of
    rows only, so later rows may fall outside ``[0, 1]``. Constant columns
    scale to 0.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path} is empty") from None
        if schema.label_column not in header:
            raise ValueError(f"{path}: label column {schema.label_column!r} not in header {header}")
        label_pos = header.index(schema.label_column)
        names = [h for i, h in enumerate(header) if i != label_pos]
        rows, raw_labels = [], []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(record)}")
            values = []
            for i, cell in enumerate(record):
                if i == label_pos:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: non-numeric value {cell!r} in column {header[i]!r}"
                    ) from None
            rows.append(values)
            raw_labels.append(record[label_pos].strip())
    if not rows:
        raise EmptyDatasetError(f"{path} has a header but no data rows")

    if schema.classes is not None:
        classes = list(schema.classes)
        unknown = sorted(set(raw_labels) - set(classes))
        if unknown:
            raise ValueError(f"{path}: unknown label value(s) {unknown}")
    else:
        classes = _label_order(raw_labels)
    if schema.class_count is not None:
        if len(classes) > schema.class_count:
            raise ValueError(
                f"{path}: found {len(classes)} label values but class_count is {schema.class_count}"
            )
        num_classes = schema.class_count
    else:
        num_classes = max(len(classes), 2)
    lookup = {c: i for i, c in enumerate(classes)}
    labels = np.array([lookup[v] for v in raw_labels], dtype=np.intp)

    X = np.array(rows, dtype=np.float64)
    prefix = max(1, int(math.floor(len(X) * schema.scale_prefix)))
    lo = X[:prefix].min(axis=0)
    hi = X[:prefix].max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (X - lo) / safe, 0.0)
    return LabeledDataset(scaled, labels, num_classes, names, classes, (lo, hi))


def write_csv(ds: LabeledDataset, path, label_column: str = "label") -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*ds.feature_names, label_column])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([*(repr(float(v)) for v in row), int(label)])
    return path


class StreamChunk:
    """One arrival of the stream. Labels stay hidden until requested."""

    def __init__(self, chunk_index: int, start: int, features: np.ndarray, labels: np.ndarray):
        if len(features) == 0:
            raise ValueError("a stream chunk needs at least one row")
        if len(labels) != len(features):
            raise ValueError("labels and features differ in length")
        self.chunk_index = chunk_index
        self.start = start
        self.features = features
        self._labels = labels
        self.labels_released = 0

    def __len__(self) -> int:
        return len(self.features)

    def request_labels(self) -> np.ndarray:
        """Release the true labels; every call is counted."""
        self.labels_released += len(self._labels)
        return self._labels

    def labels_for_scoring(self) -> np.ndarray:
        """Ground truth for offline evaluation, not visible to the learner."""
        return self._labels


def chunk_stream(
    ds: LabeledDataset, init_frac: float = 0.10, chunk_frac: float = 0.02
) -> tuple[LabeledDataset, list[StreamChunk]]:
    """Split a temporal dataset into an initial training prefix and chunks."""
    if not (0 < init_frac < 1 and 0 < chunk_frac < 1) or init_frac + chunk_frac > 1:
        raise ValueError(f"bad fractions init_frac={init_frac}, chunk_frac={chunk_frac}")
    n = len(ds)
    n_init = int(math.floor(n * init_frac + 1e-9))
    size = int(math.floor(n * chunk_frac + 1e-9))
    if n_init < 1 or size < 1 or n_init >= n:
        raise ValueError(f"a dataset of {n} rows is too small for these fractions")
    initial = ds.subset(slice(0, n_init))
    chunks = []
    for i, start in enumerate(range(n_init, n, size)):
        stop = min(start + size, n)
        chunks.append(StreamChunk(i, start, ds.features[start:stop], ds.labels[start:stop]))
    return initial, chunks
