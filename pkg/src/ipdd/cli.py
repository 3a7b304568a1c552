"""Command line entry point: ``ipdd {run,compare,theory,gen}``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import report
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config, parse_config
from .datasets import write_csv
from .metrics import evaluate_run
from .nn import Architecture, TrainConfig
from .stream import RunResult, run_method
from .theory import recurrence_sweep

__all__ = ["main", "build_parser", "run_one", "execute_runs"]

log = logging.getLogger("ipdd")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"artifact": own, "numpy": np.__version__, "python": platform.python_version()}


def run_one(values: dict, method: str, arch: str, seed: int) -> tuple[RunResult, dict, list, list]:
    """One (method, arch, seed) stream run plus its report rows.

    Module-level so that it can be shipped to worker processes.
    """
    cfg = ExperimentConfig(values)
    ds = cfg.dataset(seed)
    result = run_method(method, ds, cfg.stream_config(arch, seed))
    metrics = evaluate_run(result, ds.num_classes)
    return (
        result,
        report.summary_row(result, metrics),
        report.chunk_rows(result, metrics),
        report.event_rows(result),
    )


def execute_runs(cfg: ExperimentConfig, jobs: int = 1):
    """All configured runs in (seed, arch, method) order.

    Every run seeds itself, so the pool size never changes the numbers.
    """
    tasks = [(m, a, s) for s in cfg.seeds for a in cfg["model.arch"] for m in cfg["methods"]]
    if jobs <= 1 or len(tasks) == 1:
        return [run_one(cfg.values, m, a, s) for m, a, s in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_one, cfg.values, m, a, s) for m, a, s in tasks]
        return [f.result() for f in futures]


def _manifest(cfg: ExperimentConfig, command: str, outputs: Sequence[Path], started: str, wall: float) -> dict:
    return {
        "command": command,
        "config_hash": cfg.config_hash(),
        "config": {k: report.fmt(v) if not isinstance(v, tuple) else [report.fmt(x) for x in v]
                   for k, v in sorted(cfg.values.items())},
        "seeds": list(cfg.seeds),
        "versions": _versions(),
        "outputs": sorted(p.name for p in outputs),
        "started": started,
        "finished": _now(),
        "wall_seconds": round(wall, 3),
    }


def _write_run_outputs(cfg: ExperimentConfig, out: Path, runs, svg: bool) -> list[Path]:
    summaries = [r[1] for r in runs]
    paths = [
        report.write_rows(out / "chunks.csv", report.CHUNK_FIELDS, [row for r in runs for row in r[2]]),
        report.write_rows(out / "drift_events.csv", report.EVENT_FIELDS, [row for r in runs for row in r[3]]),
        report.write_json(out / "summary.json", {"config_hash": cfg.config_hash(), "runs": summaries}),
    ]
    if svg:
        results = [r[0] for r in runs]
        paths.append(report.svg_accuracy(results, out / "accuracy.svg"))
        for res in results:
            if res.drift_events or res.method == "ipdd":
                name = f"entropy_{res.method}_{res.arch}_seed{res.seed}.svg".replace("(", "").replace(")", "")
                paths.append(report.svg_entropy(res, out / name))
    return paths


def cmd_run(cfg: ExperimentConfig, out: Path, svg: bool) -> list[Path]:
    runs = execute_runs(cfg, cfg["jobs"])
    for r in runs:
        s = r[1]
        log.info("%s %s seed=%d accuracy=%.4f drifts=%d", s["method"], s["arch"], s["seed"], s["accuracy"], s["drift_count"])
    return _write_run_outputs(cfg, out, runs, svg)


def cmd_compare(cfg: ExperimentConfig, out: Path, svg: bool) -> list[Path]:
    if len(cfg["methods"]) < 2:
        raise ConfigError("compare needs at least two methods", key="methods")
    runs = execute_runs(cfg, cfg["jobs"])
    paths = _write_run_outputs(cfg, out, runs, svg)
    summaries = [r[1] for r in runs]
    per_seed = [dict(row, seeds=1) for row in summaries]
    paths.append(report.write_rows(out / "compare_seeds.csv", ["seed", *report.COMPARE_FIELDS[:-1]], per_seed))
    paths.append(report.write_rows(out / "compare.csv", report.COMPARE_FIELDS, report.mean_rows(summaries)))
    return paths


def theory_rows(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    train_cfg = TrainConfig(cfg["theory.epochs"], cfg["train.batch_size"], cfg["theory.learning_rate"])
    for seed in cfg.seeds:
        ds = cfg.dataset(seed)
        arch = Architecture.named(cfg["theory.arch"], ds.n_features, ds.num_classes)
        for m in cfg["theory.m"]:
            for init_count in cfg["theory.init_count"]:
                estimates = recurrence_sweep(
                    arch, ds.features, ds.labels, m, cfg["theory.N"], cfg["theory.deltas"], train_cfg,
                    cfg["theory.trials"], seed, cfg["theory.k"], init_count,
                )
                for est in estimates:
                    rows.append(
                        dict(
                            delta=est.delta,
                            m=m,
                            init_count=init_count,
                            seed=seed,
                            k=est.k,
                            trials=est.trials,
                            k_anonymity=float(np.mean([s[0] for s in est.bucket_sizes])),
                            bound=est.bound,
                            recur_freq=est.recur_freq,
                            k_bound=est.k_bound,
                            k_freq=est.k_freq,
                            sigma2=est.sigma2,
                            vacuous=est.q_raw >= 1.0,
                        )
                    )
    return rows


def cmd_theory(cfg: ExperimentConfig, out: Path, svg: bool) -> list[Path]:
    rows = theory_rows(cfg)
    return [report.write_rows(out / "theory.csv", report.THEORY_FIELDS, rows)]


def cmd_gen(cfg: ExperimentConfig, out: Path, svg: bool) -> list[Path]:
    paths = []
    for seed in cfg.seeds:
        ds = cfg.dataset(seed)
        paths.append(write_csv(ds, out / f"{cfg['dataset.kind']}_seed{seed}.csv", cfg["dataset.label_column"]))
    return paths


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "theory": cmd_theory, "gen": cmd_gen}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipdd", description="Integrally private drift detection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "run the configured methods and write per-chunk metrics, drift events and a summary",
        "compare": "run every method and write a comparison table",
        "theory": "sweep recurrence bounds against Monte Carlo frequencies",
        "gen": "export the configured stream(s) as CSV",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="key=value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                       help="override one config key (repeatable)")
        p.add_argument("--out", type=Path, default=Path("ipdd_out"), help="output directory")
        p.add_argument("--seeds", help="comma-separated seeds, overrides the config")
        p.add_argument("--svg", action="store_true", help="also write SVG charts")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("-q", "--quiet", action="store_true")
    return parser


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config("")
    overrides = list(args.overrides)
    if args.seeds is not None:
        overrides.append(f"seeds={args.seeds}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    return apply_overrides(cfg, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    started, t0 = _now(), time.perf_counter()
    try:
        cfg = _resolve(args)
        svg = args.svg or cfg["output.svg"]
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](cfg, args.out, svg)
        manifest = _manifest(cfg, args.command, outputs, started, time.perf_counter() - t0)
        report.write_json(args.out / "manifest.json", manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %d files to %s", len(outputs) + 1, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
