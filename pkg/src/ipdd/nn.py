"""Small feedforward classifiers in plain numpy.

ReLU hidden layers, softmax output, minibatch SGD on mean cross-entropy.
Everything here is a pure function of its inputs: models are immutable and
training returns a new :class:`ModelParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Architecture",
    "ModelParams",
    "TrainConfig",
    "NonFiniteLossError",
    "ArchitectureMismatchError",
    "init_model",
    "forward",
    "loss_and_grads",
    "per_example_grads",
    "train",
    "train_many",
    "model_distance",
    "mean_models",
]


class NonFiniteLossError(ArithmeticError):
    """Raised when SGD produces a NaN or infinite loss."""


class ArchitectureMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_layers: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError(f"hidden layer sizes must be positive, got {self.hidden_layers}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

    @classmethod
    def named(cls, name: str, input_dim: int, num_classes: int) -> "Architecture":
        """Build ``ann`` (one hidden layer of 10), ``dnn`` (10-20-10) or an
        explicit dash-separated hidden spec such as ``"8-4"``."""
        key = name.strip().lower()
        if key == "ann":
            hidden = (10,)
        elif key == "dnn":
            hidden = (10, 20, 10)
        else:
            try:
                hidden = tuple(int(tok) for tok in key.split("-"))
            except ValueError:
                raise ValueError(f"unknown architecture {name!r}") from None
        return cls(input_dim, hidden, num_classes)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.num_classes)

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))

    def label(self) -> str:
        return "-".join(str(h) for h in self.hidden_layers)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Weights and biases of one network, ordered input to output.

    ``weights[i]`` has shape ``(fan_out, fan_in)``; ``biases[i]`` has shape
    ``(fan_out,)``.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    arch: Architecture
    init_seed: Optional[int] = None

    def __post_init__(self):
        weights = tuple(_frozen(w) for w in self.weights)
        biases = tuple(_frozen(b) for b in self.biases)
        sizes = self.arch.layer_sizes
        if len(weights) != len(sizes) - 1 or len(biases) != len(weights):
            raise ArchitectureMismatchError("layer count does not match architecture")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ArchitectureMismatchError(
                    f"layer {i}: got W{w.shape}, b{b.shape}, expected "
                    f"W{(sizes[i + 1], sizes[i])}, b{(sizes[i + 1],)}"
                )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def n_params(self) -> int:
        return self.arch.n_params

    def flat(self) -> np.ndarray:
        """All parameters as one vector (layer by layer, weights then bias)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, vector: np.ndarray) -> "ModelParams":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {vector.shape}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vector[pos : pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(vector[pos : pos + b.size])
            pos += b.size
        return ModelParams(tuple(weights), tuple(biases), self.arch, self.init_seed)

    def neuron_rows(self) -> list[np.ndarray]:
        """Per layer, a ``(fan_out, fan_in + 1)`` matrix: each row is one
        neuron's incoming weights with its bias appended."""
        return [np.hstack([w, b[:, None]]) for w, b in zip(self.weights, self.biases)]

    def equals(self, other: "ModelParams") -> bool:
        return self.arch == other.arch and all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 10
    learning_rate: float = 0.3
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")

    def batches_per_epoch(self, n: int) -> int:
        return math.ceil(n / self.batch_size)


def init_model(arch: Architecture, seed: int) -> ModelParams:
    """Weights uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``, zero biases."""
    rng = np.random.default_rng(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(tuple(weights), tuple(biases), arch, seed)


def _as_batch(model: ModelParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.arch.input_dim:
        raise ValueError(
            f"input has {x.shape[-1] if x.ndim else 0} features, model expects {model.arch.input_dim}"
        )
    return x, single


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(weights, biases, x):
    """Return per-layer activations (input first) and output logits."""
    acts = [x]
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w.T + b
        if i == last:
            return acts, z
        h = np.maximum(z, 0.0)
        acts.append(h)
    raise AssertionError("unreachable")


def forward(model: ModelParams, x) -> np.ndarray:
    """Class probabilities for one feature vector or a ``(n, d)`` batch."""
    x, single = _as_batch(model, x)
    _, logits = _forward_cache(model.weights, model.biases, x)
    probs = _softmax(logits)
    return probs[0] if single else probs


def _backward(weights, acts, logits, y):
    """Mean cross-entropy and its gradients for a batch."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), y]))
    delta = np.exp(shifted - log_norm[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i]) * (acts[i] > 0)
    return loss, grads_w, grads_b


def _check_labels(y, n_rows: int, num_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n_rows,):
        raise ValueError(f"expected {n_rows} labels, got shape {y.shape}")
    if n_rows and (y.min() < 0 or y.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return y.astype(np.intp)


def loss_and_grads(model: ModelParams, X, y) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy over ``(X, y)`` and its gradient per weight / bias."""
    X, _ = _as_batch(model, X)
    y = _check_labels(y, X.shape[0], model.arch.num_classes)
    acts, logits = _forward_cache(model.weights, model.biases, X)
    return _backward(model.weights, acts, logits, y)


def per_example_grads(model: ModelParams, X, y) -> np.ndarray:
    """Flattened gradient of each example's loss, shape ``(n, n_params)``.

    Coordinates follow :meth:`ModelParams.flat`.
    """
    X, _ = _as_batch(model, X)
    y = _check_labels(y, X.shape[0], model.arch.num_classes)
    n = X.shape[0]
    acts, logits = _forward_cache(model.weights, model.biases, X)
    delta = _softmax(logits)
    delta[np.arange(n), y] -= 1.0
    blocks: list[np.ndarray] = []
    for i in range(len(model.weights) - 1, -1, -1):
        gw = np.einsum("no,ni->noi", delta, acts[i]).reshape(n, -1)
        blocks.append(delta.copy())
        blocks.append(gw)
        if i:
            delta = (delta @ model.weights[i]) * (acts[i] > 0)
    return np.hstack(blocks[::-1])


GradTransform = Callable[[list[np.ndarray], list[np.ndarray]], tuple[list[np.ndarray], list[np.ndarray]]]


def _sgd_stack(weights, biases, X, y, index_sets, cfg, seeds, grad_transform):
    """Run SGD for ``m`` same-shape networks in lockstep.

    ``weights[i]`` is ``(m, fan_out, fan_in)``; model ``j`` trains on rows
    ``index_sets[j]`` of ``(X, y)`` with its own shuffle stream ``seeds[j]``.
    Updates happen in place.
    """
    m, n = index_sets.shape
    rngs = [np.random.default_rng(s) for s in seeds]
    rows = np.arange(m)[:, None]
    bs = cfg.batch_size
    col_grid = np.broadcast_to(np.arange(min(bs, n)), (m, min(bs, n)))
    lr = cfg.learning_rate
    last = len(weights) - 1
    for epoch in range(cfg.epochs):
        order = np.stack([rng.permutation(n) for rng in rngs])
        epoch_idx = index_sets[rows, order]
        for start in range(0, n, bs):
            idx = epoch_idx[:, start : start + bs]
            h = X[idx]
            acts = [h]
            for i, (w, b) in enumerate(zip(weights, biases)):
                z = np.matmul(h, w.transpose(0, 2, 1)) + b[:, None, :]
                if i == last:
                    break
                h = np.maximum(z, 0.0)
                acts.append(h)
            yb = y[idx]
            batch = yb.shape[1]
            cols = col_grid[:, :batch]
            z -= z.max(axis=2, keepdims=True)
            ez = np.exp(z)
            norm = ez.sum(axis=2)
            loss = np.mean(np.log(norm) - z[rows, cols, yb], axis=1)
            if not np.all(np.isfinite(loss)):
                bad = int(np.flatnonzero(~np.isfinite(loss))[0])
                raise NonFiniteLossError(f"loss of model {bad} became {loss[bad]} in epoch {epoch}")
            delta = ez / norm[:, :, None]
            delta[rows, cols, yb] -= 1.0
            delta /= batch
            gw = [None] * len(weights)
            gb = [None] * len(weights)
            for i in range(last, -1, -1):
                gw[i] = np.matmul(delta.transpose(0, 2, 1), acts[i])
                gb[i] = delta.sum(axis=1)
                if i:
                    delta = np.matmul(delta, weights[i]) * (acts[i] > 0)
            if grad_transform is not None:
                gw, gb = grad_transform(gw, gb)
            for w, b, dw, db in zip(weights, biases, gw, gb):
                w -= lr * dw
                b -= lr * db


def train_many(
    models: Sequence[ModelParams],
    X,
    y,
    index_sets,
    cfg: TrainConfig,
    seeds: Sequence[int],
    grad_transform: Optional[GradTransform] = None,
) -> list[ModelParams]:
    """Train several same-architecture models at once.

    Model ``j`` sees rows ``index_sets[j]`` of the shared pool and shuffles
    them with ``seeds[j]`` (``cfg.shuffle_seed`` is ignored). The result for
    each model is the same as calling :func:`train` on its own rows with
    ``shuffle_seed=seeds[j]``. ``grad_transform`` gets stacked gradients with
    a leading model axis.
    """
    if len(models) == 0:
        return []
    _require_same_arch(models)
    arch = models[0].arch
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != arch.input_dim:
        raise ValueError(f"expected data with {arch.input_dim} features, got shape {X.shape}")
    y = _check_labels(y, X.shape[0], arch.num_classes)
    index_sets = np.asarray(index_sets, dtype=np.intp)
    if index_sets.ndim != 2 or index_sets.shape[0] != len(models):
        raise ValueError("index_sets must hold one equal-length row per model")
    if len(seeds) != len(models):
        raise ValueError("need one shuffle seed per model")
    n = index_sets.shape[1]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds training-set size {n}")
    weights = [np.stack([mdl.weights[i] for mdl in models]) for i in range(len(arch.layer_sizes) - 1)]
    biases = [np.stack([mdl.biases[i] for mdl in models]) for i in range(len(weights))]
    _sgd_stack(weights, biases, X, y, index_sets, cfg, list(seeds), grad_transform)
    return [
        ModelParams(tuple(w[j] for w in weights), tuple(b[j] for b in biases), arch, mdl.init_seed)
        for j, mdl in enumerate(models)
    ]


def train(
    model: ModelParams,
    X,
    y,
    cfg: TrainConfig,
    grad_transform: Optional[GradTransform] = None,
) -> ModelParams:
    """Minibatch SGD on mean cross-entropy; returns a new model.

    Each epoch visits the data in an order drawn from ``cfg.shuffle_seed``.
    ``grad_transform`` receives ``(grads_w, grads_b)`` for every minibatch,
    each array carrying a leading axis of length 1, and returns the step
    direction. It is the hook used by the DP baseline.
    """
    X, _ = _as_batch(model, X)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    (trained,) = train_many(
        [model], X, y, np.arange(n)[None, :], cfg, [cfg.shuffle_seed], grad_transform
    )
    return trained


def _require_same_arch(models: Sequence[ModelParams]) -> None:
    arch = models[0].arch
    for m in models[1:]:
        if m.arch != arch:
            raise ArchitectureMismatchError(f"{m.arch} differs from {arch}")


def model_distance(a: ModelParams, b: ModelParams) -> float:
    """Largest Euclidean distance between position-aligned neurons.

    A neuron is its incoming weight row with the bias appended; the result is
    the max over every neuron of every layer.
    """
    _require_same_arch([a, b])
    worst = 0.0
    for wa, ba, wb, bb in zip(a.weights, a.biases, b.weights, b.biases):
        diff = np.hstack([wa - wb, (ba - bb)[:, None]])
        # scale each row first so tiny differences do not underflow to zero
        scale = np.abs(diff).max(axis=1)
        safe = np.where(scale > 0, scale, 1.0)
        norms = scale * np.sqrt(((diff / safe[:, None]) ** 2).sum(axis=1))
        worst = max(worst, float(norms.max()))
    return worst


def mean_models(models: Sequence[ModelParams]) -> ModelParams:
    """Coordinate-wise mean of every weight and bias."""
    if len(models) == 0:
        raise ValueError("cannot average an empty list of models")
    _require_same_arch(models)
    n_layers = len(models[0].weights)
    weights = tuple(np.mean([m.weights[i] for m in models], axis=0) for i in range(n_layers))
    biases = tuple(np.mean([m.biases[i] for m in models], axis=0) for i in range(n_layers))
    return ModelParams(weights, biases, models[0].arch, models[0].init_seed)
