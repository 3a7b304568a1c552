"""Label-free drift signal: ensemble predictive entropy fed to ADWIN."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

__all__ = [
    "predictive_entropy",
    "Adwin",
    "adwin_new",
    "adwin_update",
    "adwin_width",
    "adwin_mean",
]

_SIMPLEX_TOL = 1e-6


def predictive_entropy(member_probs) -> float | np.ndarray:
    """Shannon entropy (nats) of the ensemble-mean class distribution.

    ``member_probs`` is ``(members, classes)`` for one instance or
    ``(members, instances, classes)`` for a batch, in which case one entropy
    per instance is returned. ``0 * ln 0`` counts as 0.
    """
    p = np.asarray(member_probs, dtype=np.float64)
    if p.ndim not in (2, 3) or p.shape[0] == 0:
        raise ValueError("need a non-empty stack of probability vectors")
    if np.any(p < -_SIMPLEX_TOL) or np.any(np.abs(p.sum(axis=-1) - 1.0) > _SIMPLEX_TOL):
        raise ValueError("member outputs must be probability vectors")
    mean = np.clip(p.mean(axis=0), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mean > 0, mean * np.log(mean), 0.0)
    h = np.maximum(-terms.sum(axis=-1), 0.0)
    return float(h) if h.ndim == 0 else h


class Adwin:
    """ADaptive WINdowing over real values (Bifet and Gavalda, ADWIN2).

    The window is summarised by an exponential histogram: row ``i`` holds
    buckets of ``2**i`` values, at most ``max_buckets`` per row after
    compression. After every insert all bucket boundaries are tried as split
    points ``W = W0 . W1``; when the sub-window means differ by at least

        eps_cut = sqrt(1 / (2 m) * ln(4 / delta')),
        m = 1 / (1/|W0| + 1/|W1|),  delta' = delta / |W|

    the older part ``W0`` is dropped and the test repeats.
    """

    def __init__(self, delta: float = 0.002, max_buckets: int = 5):
        if not 0 < delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        if max_buckets < 1:
            raise ValueError("max_buckets must be positive")
        self.delta = float(delta)
        self.max_buckets = max_buckets
        # rows[i] is a list of [sum, variance] buckets of size 2**i, oldest first
        self.rows: list[list[list[float]]] = [[]]
        self.width = 0
        self.total = 0.0
        self.variance = 0.0  # sum of squared deviations over the window
        self.n_seen = 0
        self.n_detections = 0
        self.last_dropped = 0

    @property
    def mean(self) -> float:
        return self.total / self.width if self.width else 0.0

    def __len__(self) -> int:
        return self.width

    def update(self, x: float) -> bool:
        """Insert ``x``; return True if a change was detected.

        The number of elements discarded by this call is left in
        :attr:`last_dropped`.
        """
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"ADWIN input must be finite, got {x}")
        self.n_seen += 1
        if self.width:
            d = x - self.mean
            self.variance += self.width * d * d / (self.width + 1)
        self.width += 1
        self.total += x
        self.rows[0].append([x, 0.0])
        self._compress()
        dropped = self._detect()
        self.last_dropped = dropped
        if dropped:
            self.n_detections += 1
        return dropped > 0

    def _compress(self) -> None:
        i = 0
        while i < len(self.rows):
            row = self.rows[i]
            if len(row) <= self.max_buckets:
                break
            (s1, v1), (s2, v2) = row[0], row[1]
            size = 2**i
            diff = s1 / size - s2 / size
            merged = [s1 + s2, v1 + v2 + size * size * diff * diff / (2 * size)]
            del row[:2]
            if i + 1 == len(self.rows):
                self.rows.append([])
            self.rows[i + 1].append(merged)
            i += 1

    def _first_cut(self) -> Optional[int]:
        """Number of oldest buckets forming W0 at the first violating split."""
        width = self.width
        if width < 2:
            return None
        log_term = math.log(4.0 * width / self.delta)
        total = self.total
        n0 = 0
        s0 = 0.0
        seen = 0
        for i in range(len(self.rows) - 1, -1, -1):
            size = 2**i
            for bucket in self.rows[i]:
                n0 += size
                s0 += bucket[0]
                seen += 1
                n1 = width - n0
                if n1 <= 0:
                    return None
                eps = math.sqrt(0.5 * (1.0 / n0 + 1.0 / n1) * log_term)
                if abs(s0 / n0 - (total - s0) / n1) >= eps:
                    return seen
        return None

    def _drop_oldest(self, n_buckets: int) -> int:
        dropped = 0
        for _ in range(n_buckets):
            while not self.rows[-1]:
                self.rows.pop()
            i = len(self.rows) - 1
            s, v = self.rows[i].pop(0)
            size = 2**i
            rest = self.width - size
            mu_b = s / size
            if rest > 0:
                mu_rest = (self.total - s) / rest
                self.variance -= v + size * rest / self.width * (mu_b - mu_rest) ** 2
                self.variance = max(self.variance, 0.0)
            else:
                self.variance = 0.0
            self.width = rest
            self.total -= s
            dropped += size
        while len(self.rows) > 1 and not self.rows[-1]:
            self.rows.pop()
        return dropped

    def _detect(self) -> int:
        dropped = 0
        while True:
            cut = self._first_cut()
            if cut is None:
                return dropped
            dropped += self._drop_oldest(cut)

    def bucket_counts(self) -> list[int]:
        return [len(r) for r in self.rows]


def adwin_new(delta: float) -> Adwin:
    return Adwin(delta)


def adwin_update(state: Adwin, x: float) -> tuple[Adwin, bool, int]:
    drift = state.update(x)
    return state, drift, state.last_dropped


def adwin_width(state: Adwin) -> int:
    return state.width


def adwin_mean(state: Adwin) -> float:
    return state.mean
