"""End-to-end acceptance checks, one test per criterion.

Each test appends a ``PASS``/``FAIL`` line to the terminal summary before
asserting, so the full verdict list appears even when some criteria fail.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ipdd.cli import main
from ipdd.datasets import DriftSpec, blobs, gen_sine
from ipdd.detector import Adwin, predictive_entropy
from ipdd.ensemble import build_ensemble, derive_seed, generate_subsamples, max_bucket_size, train_on_subsamples
from ipdd.metrics import accuracy, auc, mcc
from ipdd.nn import Architecture, TrainConfig, init_model, loss_and_grads, model_distance
from ipdd.stream import StreamConfig, run_method
from ipdd.theory import BoundInputs, bound_all_recurrence, bound_k_anonymity, bound_pair_recurrence, recurrence_sweep
from oracles import ExactAdwin, binary_mcc, brute_force_auc, drift_indices, mixed_sequence, numeric_grads

pytestmark = pytest.mark.slow


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _flat_grads(gw, gb):
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(gw, gb)])


def test_criterion_01_gradient_check():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        depth = int(rng.integers(0, 4))
        hidden = tuple(int(rng.integers(1, cap + 1)) for cap in (10, 20, 10)[:depth])
        arch = Architecture(int(rng.integers(1, 9)), hidden, int(rng.integers(2, 5)))
        model = init_model(arch, int(rng.integers(2**31)))
        model = model.with_flat(model.flat() + rng.normal(0, 0.3, arch.n_params))
        x = rng.normal(size=(1, arch.input_dim))
        y = rng.integers(0, arch.num_classes, 1)
        _, gw, gb = loss_and_grads(model, x, y)
        analytic = _flat_grads(gw, gb)
        numeric = numeric_grads(lambda th: loss_and_grads(model.with_flat(th), x, y)[0], model.flat(), h=1e-5)
        denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / denom))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 10
    assert record(1, ok, f"worst relative error {worst:.2e} over 50 triples in {elapsed:.1f}s")


def test_criterion_02_adwin_oracle():
    start = time.perf_counter()
    mismatched = []
    worst_gap = 0
    for seed in range(100):
        values = mixed_sequence(seed)
        fast = drift_indices(Adwin(0.001), values)
        exact = drift_indices(ExactAdwin(0.001), values)
        if len(fast) != len(exact):
            mismatched.append(seed)
            continue
        gaps = [abs(a - b) for a, b in zip(fast, exact)]
        worst_gap = max([worst_gap, *gaps])
        if any(g > 32 for g in gaps):
            mismatched.append(seed)
    alarms = 0
    for seed in range(20):
        state = Adwin(0.001)
        alarms += sum(state.update(v) for v in np.random.default_rng(seed).uniform(size=10_000))
    elapsed = time.perf_counter() - start
    ok = not mismatched and alarms <= 5 and elapsed < 60
    detail = (f"{100 - len(mismatched)}/100 sequences within 32 (worst gap {worst_gap}), "
              f"{alarms} false alarms on 20x10k uniform, {elapsed:.1f}s")
    assert record(2, ok, detail)


def test_criterion_03_entropy():
    expected = -(0.7 * math.log(0.7) + 0.3 * math.log(0.3))
    got = [
        predictive_entropy([[0.5, 0.5]]),
        predictive_entropy([[0.0, 1.0], [0.0, 1.0]]),
        predictive_entropy([[0.9, 0.1], [0.5, 0.5]]),
    ]
    targets = [math.log(2), 0.0, 0.610864]
    errors = [abs(g - t) for g, t in zip(got, targets)]
    ok = max(errors) <= 1e-6 and abs(expected - 0.610864) <= 1e-6
    assert record(3, ok, f"entropies {[round(g, 7) for g in got]}, max error {max(errors):.1e}")


def test_criterion_04_bucket_invariants():
    arch = Architecture.named("ann", 4, 2)
    failures = []
    for seed in range(20):
        pool = gen_sine(10_000, seed=seed)
        ens, buckets = build_ensemble(pool.features, pool.labels, arch, TrainConfig(), None, 20, 0.01, 5, seed)
        disjoint = ens.subsamples.pairwise_disjoint() and len(ens.subsamples) == 20
        members_ok = all(model_distance(m, b.representative) <= 0.01 for b in buckets for m in b.members)
        means_ok = all(
            model_distance(mean, b.representative) <= 0.01 for mean, b in zip(ens.members, buckets)
        )
        if not (disjoint and members_ok and means_ok):
            failures.append(seed)
    assert record(4, not failures, f"20 builds, failing seeds {failures}")


@pytest.fixture(scope="module")
def reversal_runs():
    """IPDD and baselines on ten reversal streams, with total wall time."""
    methods = ("ipdd", "no_retrain", "dp(1.0)", "dp(0.1)")
    start = time.perf_counter()
    runs = {name: [] for name in methods}
    for seed in range(10):
        ds = gen_sine(20_000, DriftSpec("abrupt", (10_000,)), seed=seed)
        cfg = StreamConfig(arch="ann", delta=0.01, adwin_delta=0.001, seed=seed)
        for name in methods:
            runs[name].append(run_method(name, ds, cfg))
    return runs, time.perf_counter() - start


def test_criterion_05_drift_recovery(reversal_runs):
    runs, elapsed = reversal_runs
    # 2000 initial records then chunks of 400: the reversal opens chunk 20
    reversal_chunk = 20
    detected = sum(
        any(reversal_chunk <= e.chunk_index <= reversal_chunk + 5 for e in r.drift_events) for r in runs["ipdd"]
    )
    ipdd_acc = np.mean([accuracy(r.labels, r.predictions) for r in runs["ipdd"]])
    base_acc = np.mean([accuracy(r.labels, r.predictions) for r in runs["no_retrain"]])
    base_drifts = sum(r.drift_count for r in runs["no_retrain"])
    ok = detected >= 9 and ipdd_acc - base_acc >= 0.15 and base_drifts == 0 and elapsed < 600
    detail = (f"detected in {detected}/10 seeds, accuracy ipdd {ipdd_acc:.3f} vs no_retrain {base_acc:.3f} "
              f"(gap {ipdd_acc - base_acc:+.3f}), no_retrain drifts {base_drifts}, {elapsed:.0f}s")
    assert record(5, ok, detail)


def sign_test_p(wins: int, losses: int) -> float:
    """One-sided binomial sign test p-value, ties dropped."""
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(math.comb(n, i) for i in range(wins, n + 1)) / 2**n


def test_criterion_06_method_ordering(reversal_runs):
    runs, _ = reversal_runs
    acc = {name: np.array([accuracy(r.labels, r.predictions) for r in rs]) for name, rs in runs.items()}
    verdicts = []
    for hi, lo in (("ipdd", "dp(1.0)"), ("dp(1.0)", "dp(0.1)")):
        diff = acc[hi] - acc[lo]
        p = sign_test_p(int((diff > 0).sum()), int((diff < 0).sum()))
        verdicts.append((hi, lo, acc[hi].mean() >= acc[lo].mean() and p < 0.05, p))
    ok = all(v[2] for v in verdicts)
    means = ", ".join(f"{k} {v.mean():.3f}" for k, v in acc.items() if k != "no_retrain")
    tests = ", ".join(f"{hi}>{lo} p={p:.3f}" for hi, lo, _, p in verdicts)
    assert record(6, ok, f"mean accuracy {means}; sign tests {tests}")


def test_criterion_07_bounds_and_monte_carlo():
    def q_inputs(q, m, T, k=2):
        return BoundInputs(m=m, b=1, T=T, delta=1.0, sigma2=q, k=k)

    exact = [
        (bound_pair_recurrence(q_inputs(0.5, 2, 1)), 0.25),
        (bound_all_recurrence(q_inputs(0.1, 5, 3)), 0.9**15),
        (bound_k_anonymity(q_inputs(0.5, 4, 1, k=3)), 0.3125),
    ]
    exact_ok = all(abs(a - b) <= 1e-12 for a, b in exact) and abs(0.9**15 - 0.205891) <= 1e-6

    start = time.perf_counter()
    arch = Architecture(2, (3,), 2)
    cfg = TrainConfig(epochs=5, batch_size=10, learning_rate=0.1)
    deltas = [0.05, 0.2, 0.5, 1.0, 2.0]
    results = []
    for m in (5, 10):
        for seed in (0, 1):
            ds = blobs(m * 100, seed=seed)
            results += recurrence_sweep(arch, ds.features, ds.labels, m, 100, deltas, cfg, trials=30, seed=seed)
    held = sum(e.recur_freq >= e.bound - 2 * e.standard_error for e in results)
    elapsed = time.perf_counter() - start
    ok = exact_ok and held >= 0.95 * len(results) and elapsed < 900
    detail = (f"analytic examples {'exact' if exact_ok else 'off'}; Monte Carlo above bound-2SE in "
              f"{held}/{len(results)} configs, {elapsed:.1f}s")
    assert record(7, ok, detail)


def test_criterion_08_k_anonymity_trends():
    # short training keeps models close enough for Delta <= 0.1 to group them
    arch = Architecture.named("ann", 4, 2)
    cfg = TrainConfig(epochs=5, batch_size=10, learning_rate=0.1)
    deltas = [1e-4, 1e-3, 1e-2, 1e-1]
    delta_ok = True
    by_m = {20: [], 50: [], 100: []}
    for seed in range(10):
        pool = gen_sine(10_000, seed=seed)
        for m in by_m:
            sub = generate_subsamples(len(pool), 100, m, derive_seed(seed, m))
            models = train_on_subsamples(pool.features, pool.labels, arch, cfg, sub, seed)
            sizes = [max_bucket_size(models, d) for d in deltas]
            delta_ok &= sizes == sorted(sizes)
            by_m[m].append(sizes[-1])
    means = [float(np.mean(v)) for v in by_m.values()]
    ok = delta_ok and means == sorted(means)
    detail = (f"Delta sweep non-decreasing in every seed: {delta_ok}; mean max bucket at Delta=0.1 "
              f"for m=20,50,100: {[round(x, 1) for x in means]}")
    assert record(8, ok, detail)


def test_criterion_09_metric_oracles():
    rng = np.random.default_rng(99)
    mcc_err = 0.0
    for _ in range(1000):
        tn, fp, fn, tp = (int(v) for v in rng.integers(0, 100, 4))
        mcc_err = max(mcc_err, abs(mcc([[tn, fp], [fn, tp]]) - binary_mcc(tp, tn, fp, fn)))
    auc_mismatch = 0
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        labels = rng.integers(0, 2, n)
        labels[rng.permutation(n)[:2]] = [0, 1]
        scores = rng.integers(0, 10, n) / 9.0 if rng.uniform() < 0.5 else rng.uniform(size=n)
        auc_mismatch += auc(labels, scores) != brute_force_auc(labels, scores)
    ok = mcc_err <= 1e-12 and auc_mismatch == 0
    assert record(9, ok, f"max MCC error {mcc_err:.1e}, AUC mismatches {auc_mismatch}/1000")


def test_criterion_10_compare_is_deterministic(tmp_path):
    args = ["compare", "--set", "dataset.n=4000", "--set", "ipdd.m=10", "--set", "train.epochs=20",
            "--set", "methods=ipdd,no_retrain,dp(1.0)", "--seeds", "0,1", "-q"]
    codes = [main([*args, "--out", str(tmp_path / run)]) for run in ("a", "b")]
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in csvs)
    ok = codes == [0, 0] and len(csvs) >= 4 and same
    assert record(10, ok, f"{len(csvs)} CSV files byte-identical across two runs: {same}")
