"""Flat ``key = value`` experiment configuration with dotted sections.

Example::

    # drift stream
    dataset.kind = sine
    dataset.n = 20000
    dataset.drift = abrupt
    dataset.drift_at = 0.5
    methods = ipdd, no_retrain, dp(1.0)
    train.epochs = 100
    seeds = 0, 1, 2

Unknown keys and malformed values raise :class:`ConfigError` carrying the
line number, so the CLI can point at the offending line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

from .datasets import CsvSchema, DriftSpec, LabeledDataset, blobs, gen_sine, load_csv
from .nn import TrainConfig
from .stream import StreamConfig, parse_method

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "DEFAULTS",
    "parse_config",
    "load_config",
    "apply_overrides",
    "to_json",
]


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _opt_int(text: str) -> Optional[int]:
    return None if text.lower() in ("", "none", "auto") else int(text)


def _opt_str(text: str) -> Optional[str]:
    return None if text.lower() in ("", "none") else text


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _words(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _methods(text: str) -> tuple[str, ...]:
    # "dp(0.1)" contains no comma, so a plain split is safe
    names = _words(text)
    for name in names:
        parse_method(name)
    return names


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default)
_SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "dataset.kind": (str, "sine"),
    "dataset.n": (int, 20_000),
    "dataset.drift": (str, "abrupt"),
    "dataset.drift_at": (_floats, (0.5,)),
    "dataset.transition": (int, 1),
    "dataset.feature_shift": (float, 0.0),
    "dataset.separation": (float, 2.0),
    "dataset.path": (_opt_str, None),
    "dataset.label_column": (str, "label"),
    "dataset.classes": (_opt_int, None),
    "dataset.delimiter": (str, ","),
    "model.arch": (_words, ("ann",)),
    "ipdd.delta": (float, 0.01),
    "ipdd.m": (int, 25),
    "ipdd.N": (_opt_int, None),
    "ipdd.k": (int, 5),
    "ipdd.init_count": (int, 1),
    "adwin.delta": (float, 0.001),
    "train.epochs": (int, 100),
    "train.batch_size": (int, 10),
    "train.learning_rate": (float, 0.3),
    "stream.window_capacity": (_opt_int, None),
    "stream.init_frac": (float, 0.10),
    "stream.chunk_frac": (float, 0.02),
    "dp.clip": (float, 1.0),
    "dp.delta": (float, 1e-5),
    "methods": (_methods, ("ipdd", "no_retrain")),
    "seeds": (_ints, (0,)),
    "jobs": (int, 1),
    "theory.deltas": (_floats, (1e-4, 1e-3, 1e-2, 1e-1)),
    "theory.m": (_ints, (10,)),
    "theory.N": (int, 100),
    "theory.trials": (int, 30),
    "theory.init_count": (_ints, (1,)),
    "theory.k": (int, 2),
    "theory.arch": (str, "3"),
    "theory.epochs": (int, 5),
    "theory.learning_rate": (float, 0.1),
    "output.svg": (_bool, False),
}

DEFAULTS: dict[str, Any] = {k: v for k, (_, v) in _SCHEMA.items()}

# keys that change how a run executes but never what it computes
_EXECUTION_KEYS = frozenset({"jobs", "output.svg"})


def _render(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def canonical(self) -> str:
        """Sorted ``key=value`` text of every result-determining key."""
        keys = sorted(k for k in self.values if k not in _EXECUTION_KEYS)
        return "\n".join(f"{k}={_render(self.values[k])}" for k in keys) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    @property
    def seeds(self) -> tuple[int, ...]:
        return self.values["seeds"]

    def stream_config(self, arch: str, seed: int) -> StreamConfig:
        v = self.values
        return StreamConfig(
            arch=arch,
            train=TrainConfig(v["train.epochs"], v["train.batch_size"], v["train.learning_rate"]),
            delta=v["ipdd.delta"],
            adwin_delta=v["adwin.delta"],
            m=v["ipdd.m"],
            N=v["ipdd.N"],
            k=v["ipdd.k"],
            init_count=v["ipdd.init_count"],
            window_capacity=v["stream.window_capacity"],
            init_frac=v["stream.init_frac"],
            chunk_frac=v["stream.chunk_frac"],
            seed=seed,
            dp_clip=v["dp.clip"],
            dp_delta=v["dp.delta"],
        )

    def drift_spec(self) -> DriftSpec:
        v = self.values
        if v["dataset.drift"] == "none":
            return DriftSpec()
        positions = tuple(
            int(round(p * v["dataset.n"])) if 0 < p < 1 else int(p) for p in v["dataset.drift_at"]
        )
        return DriftSpec(v["dataset.drift"], positions, v["dataset.transition"], v["dataset.feature_shift"])

    def dataset(self, seed: int) -> LabeledDataset:
        """The stream for one seed; generated streams use ``seed`` directly."""
        v = self.values
        kind = v["dataset.kind"]
        if kind == "sine":
            return gen_sine(v["dataset.n"], self.drift_spec(), seed)
        if kind == "blobs":
            return blobs(v["dataset.n"], seed, v["dataset.separation"])
        if kind == "csv":
            if not v["dataset.path"]:
                raise ConfigError("dataset.kind=csv needs dataset.path", key="dataset.path")
            schema = CsvSchema(v["dataset.label_column"], v["dataset.classes"], v["dataset.delimiter"])
            return load_csv(v["dataset.path"], schema)
        raise ConfigError(f"unknown dataset.kind {kind!r}", key="dataset.kind")


def _set(values: dict, key: str, raw: str, line: Optional[int]) -> None:
    if key not in _SCHEMA:
        raise ConfigError(f"unknown key {key!r}", line, key)
    parser, _ = _SCHEMA[key]
    try:
        values[key] = parser(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", line, key) from None


def _split(text: str, line: Optional[int]) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text.strip()!r}", line)
    key, raw = text.split("=", 1)
    return key.strip(), raw


def _validate(values: dict) -> None:
    checks = [
        ("dataset.kind", values["dataset.kind"] in ("sine", "blobs", "csv"), "must be sine, blobs or csv"),
        ("dataset.drift", values["dataset.drift"] in ("none", "abrupt", "gradual", "incremental"),
         "must be none, abrupt, gradual or incremental"),
        ("dataset.n", values["dataset.n"] > 0, "must be positive"),
        ("ipdd.delta", values["ipdd.delta"] > 0, "must be positive"),
        ("adwin.delta", 0 < values["adwin.delta"] < 1, "must lie in (0, 1)"),
        ("ipdd.m", values["ipdd.m"] >= 1, "must be positive"),
        ("ipdd.k", values["ipdd.k"] >= 1, "must be positive"),
        ("seeds", len(values["seeds"]) > 0, "needs at least one seed"),
        ("jobs", values["jobs"] >= 1, "must be positive"),
        ("methods", len(values["methods"]) > 0, "needs at least one method"),
        ("theory.trials", values["theory.trials"] >= 1, "must be positive"),
    ]
    for key, ok, message in checks:
        if not ok:
            raise ConfigError(f"{key} {message}", key=key)
    try:
        TrainConfig(values["train.epochs"], values["train.batch_size"], values["train.learning_rate"])
    except ValueError as exc:
        raise ConfigError(str(exc), key="train") from None


def parse_config(text: str) -> ExperimentConfig:
    values = dict(DEFAULTS)
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, raw = _split(line, lineno)
        _set(values, key, raw, lineno)
    _validate(values)
    return ExperimentConfig(values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``key=value`` strings from ``--set`` on top of ``cfg``."""
    values = dict(cfg.values)
    for item in overrides or ():
        key, raw = _split(item, None)
        _set(values, key, raw, None)
    _validate(values)
    return replace(cfg, values=values)


def to_json(cfg: ExperimentConfig) -> str:
    return json.dumps({k: _render(v) for k, v in cfg.values.items()}, sort_keys=True, indent=2)
