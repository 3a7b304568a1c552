"""Writers for run, comparison and sweep results.

All CSVs use a header row, ``.`` decimals, ``\\n`` line endings and
``repr`` floats, so identical inputs give byte-identical files. Wall-clock
times go only into the manifest.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .metrics import MetricsReport
from .stream import RunResult

__all__ = [
    "CHUNK_FIELDS",
    "EVENT_FIELDS",
    "COMPARE_FIELDS",
    "THEORY_FIELDS",
    "fmt",
    "write_rows",
    "read_rows",
    "chunk_rows",
    "event_rows",
    "summary_row",
    "mean_rows",
    "write_json",
    "svg_accuracy",
    "svg_entropy",
]

CHUNK_FIELDS = ["method", "arch", "seed", "chunk", "start", "size", "accuracy", "mcc", "auc", "mean_entropy", "drift"]
EVENT_FIELDS = ["method", "arch", "seed", "chunk", "instance", "detector_width", "labels_requested"]
COMPARE_FIELDS = ["method", "arch", "accuracy", "mcc", "auc", "drift_count", "label_requests", "seeds"]
THEORY_FIELDS = [
    "delta", "m", "init_count", "seed", "k", "trials", "k_anonymity",
    "bound", "recur_freq", "k_bound", "k_freq", "sigma2", "vacuous",
]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "nan" if math.isnan(v) else repr(v)
    return str(value)


def write_rows(path, fields: Sequence[str], rows: Iterable[dict]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([fmt(row[f]) for f in fields])
    return path


def read_rows(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _nanmean(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[~np.isnan(arr)]
    return float(arr.mean()) if arr.size else float("nan")


def chunk_rows(result: RunResult, report: MetricsReport) -> list[dict]:
    drifted = {e.chunk_index for e in result.drift_events}
    rows = []
    for i, (s, start, size) in enumerate(zip(result.chunk_slices(), result.chunk_starts, result.chunk_sizes)):
        rows.append(
            dict(
                method=result.method,
                arch=result.arch,
                seed=result.seed,
                chunk=i,
                start=start,
                size=size,
                accuracy=report.chunk_accuracy[i],
                mcc=report.chunk_mcc[i],
                auc=report.chunk_auc[i],
                mean_entropy=float(result.uncertainty[s].mean()),
                drift=i in drifted,
            )
        )
    return rows


def event_rows(result: RunResult) -> list[dict]:
    return [
        dict(
            method=result.method,
            arch=result.arch,
            seed=result.seed,
            chunk=e.chunk_index,
            instance=e.instance_index,
            detector_width=e.detector_width_before,
            labels_requested=e.labels_requested,
        )
        for e in result.drift_events
    ]


def summary_row(result: RunResult, report: MetricsReport) -> dict:
    return dict(
        method=result.method,
        arch=result.arch,
        seed=result.seed,
        accuracy=report.accuracy,
        mcc=report.mcc,
        auc=None if math.isnan(report.auc) else report.auc,
        drift_count=result.drift_count,
        label_requests=result.label_requests,
        retrain_count=result.retrain_count,
        ensemble_sizes=list(result.ensemble_sizes),
        drift_chunks=[e.chunk_index for e in result.drift_events],
    )


def mean_rows(summaries: Sequence[dict]) -> list[dict]:
    """Average summary rows over seeds, one row per (method, arch)."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in summaries:
        groups.setdefault((row["method"], row["arch"]), []).append(row)
    out = []
    for (method, arch), rows in groups.items():
        out.append(
            dict(
                method=method,
                arch=arch,
                accuracy=float(np.mean([r["accuracy"] for r in rows])),
                mcc=float(np.mean([r["mcc"] for r in rows])),
                auc=_nanmean([np.nan if r["auc"] is None else r["auc"] for r in rows]),
                drift_count=float(np.mean([r["drift_count"] for r in rows])),
                label_requests=float(np.mean([r["label_requests"] for r in rows])),
                seeds=len(rows),
            )
        )
    return out


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("SVG charts need matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save_svg(fig, path) -> Path:
    # fixed metadata keeps the file stable across reruns
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    return Path(path)


def svg_accuracy(results: Sequence[RunResult], path) -> Path:
    """Accuracy per chunk, one line per run, with drift markers."""
    plt = _pyplot()
    plt.rcParams["svg.hashsalt"] = "ipdd"
    fig, ax = plt.subplots(figsize=(8, 4))
    for r in results:
        acc = r.chunk_accuracy()
        (line,) = ax.plot(acc, label=f"{r.method} ({r.arch}, seed {r.seed})")
        drifts = [e.chunk_index for e in r.drift_events]
        ax.plot(drifts, acc[drifts], "v", color=line.get_color())
    ax.set_xlabel("chunk")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize="small")
    fig.tight_layout()
    out = _save_svg(fig, path)
    plt.close(fig)
    return out


def svg_entropy(result: RunResult, path) -> Path:
    """Per-instance predictive entropy with detected drifts marked."""
    plt = _pyplot()
    plt.rcParams["svg.hashsalt"] = "ipdd"
    fig, ax = plt.subplots(figsize=(8, 3))
    start = result.chunk_starts[0]
    ax.plot(np.arange(len(result.uncertainty)) + start, result.uncertainty, lw=0.4)
    for e in result.drift_events:
        ax.axvline(e.instance_index, color="red", lw=1)
    ax.set_xlabel("instance")
    ax.set_ylabel("entropy (nats)")
    ax.set_title(f"{result.method} ({result.arch}, seed {result.seed})")
    fig.tight_layout()
    out = _save_svg(fig, path)
    plt.close(fig)
    return out
