import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ipdd.stream as stream
from ipdd.datasets import DriftSpec, gen_sine
from ipdd.ensemble import Ensemble
from ipdd.nn import Architecture, TrainConfig, forward, init_model, loss_and_grads, train
from ipdd.stream import (
    RetrainError,
    StreamConfig,
    TrainingWindow,
    dp_noise_std,
    dp_train,
    ensemble_predict,
    parse_method,
    run_baseline,
    run_ipdd,
    run_method,
)

FAST = StreamConfig(train=TrainConfig(epochs=20, batch_size=10, learning_rate=0.3), m=10, k=3)


def _constant_model(probs):
    """A network whose output is ``probs`` for every input."""
    arch = Architecture(2, (2,), len(probs))
    flat = np.zeros(arch.n_params)
    model = init_model(arch, 0).with_flat(flat)
    biases = [np.zeros(2), np.log(np.asarray(probs, dtype=float))]
    return type(model)(model.weights, biases, arch)


def test_one_member_ensemble_is_forward_argmax():
    model = init_model(Architecture(3, (5,), 3), 4)
    x = np.array([0.2, -1.0, 0.7])
    label, probs = ensemble_predict([model], x)
    assert label == int(np.argmax(forward(model, x)))
    np.testing.assert_allclose(probs[0], forward(model, x))


def test_mean_vote():
    members = [_constant_model([0.9, 0.1]), _constant_model([0.2, 0.8])]
    label, probs = ensemble_predict(members, [0.0, 0.0])
    np.testing.assert_allclose(probs.mean(axis=0), [0.55, 0.45])
    assert label == 0


def test_tie_goes_to_lowest_class():
    members = [_constant_model([0.5, 0.5])]
    assert ensemble_predict(members, [1.0, 2.0])[0] == 0


def test_ensemble_object_and_dimension_check():
    model = init_model(Architecture(2, (2,), 2), 0)
    ens = Ensemble([model], [1], 0.01, 1, 1)
    assert ensemble_predict(ens, [0.1, 0.2])[0] in (0, 1)
    with pytest.raises(ValueError):
        ensemble_predict(ens, [0.1, 0.2, 0.3])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.lists(st.integers(0, 15), max_size=12))
def test_window_keeps_a_contiguous_suffix(capacity, batch_sizes):
    window = TrainingWindow(capacity)
    appended = 0
    for size in batch_sizes:
        X = np.arange(appended, appended + size, dtype=float)[:, None]
        window.extend(X, np.zeros(size, dtype=int))
        appended += size
    X, _ = window.arrays()
    kept = X[:, 0].astype(int).tolist() if len(X) else []
    assert len(kept) == min(capacity, appended)
    assert kept == list(range(appended - len(kept), appended))


def test_window_rejects_zero_capacity():
    with pytest.raises(ValueError):
        TrainingWindow(0)


def test_noise_scale():
    assert dp_noise_std(1.0) == pytest.approx(math.sqrt(2 * math.log(1.25e5)), rel=1e-12)
    assert dp_noise_std(1.0) == pytest.approx(4.8448, abs=1e-4)
    assert dp_noise_std(0.1) == pytest.approx(10 * dp_noise_std(1.0))
    with pytest.raises(ValueError):
        dp_noise_std(0.0)


def test_clipping_bounds_the_update():
    transform = stream._clip_and_noise(1e12, 1.0, 1e-5, [0])
    gw = [np.full((1, 2, 3), 10 / math.sqrt(8))]
    gb = [np.full((1, 2), 10 / math.sqrt(8))]
    assert math.sqrt((gw[0] ** 2).sum() + (gb[0] ** 2).sum()) == pytest.approx(10.0)
    out_w, out_b = transform(gw, gb)
    assert math.sqrt((out_w[0] ** 2).sum() + (out_b[0] ** 2).sum()) <= 1.0 + 1e-9


def test_small_gradients_are_not_clipped():
    transform = stream._clip_and_noise(1e12, 1.0, 1e-5, [0])
    gw = [np.full((1, 2, 2), 0.1)]
    gb = [np.full((1, 2), 0.1)]
    out_w, out_b = transform([g.copy() for g in gw], [g.copy() for g in gb])
    np.testing.assert_allclose(out_w[0], gw[0], atol=1e-9)
    np.testing.assert_allclose(out_b[0], gb[0], atol=1e-9)


def test_huge_epsilon_approaches_plain_training():
    ds = gen_sine(100, seed=0)
    model = init_model(Architecture.named("ann", 4, 2), 0)
    cfg = TrainConfig(epochs=3, batch_size=10, learning_rate=0.1)
    # gradients here stay below the clip norm, so only the noise differs
    _, gw, gb = loss_and_grads(model, ds.features[:10], ds.labels[:10])
    assert math.sqrt(sum((g**2).sum() for g in gw + gb)) < 1.0
    plain = train(model, ds.features, ds.labels, cfg)
    private = dp_train(model, ds.features, ds.labels, cfg, epsilon=1e9)
    assert np.abs(plain.flat() - private.flat()).max() <= 1e-3


def test_dp_train_is_seeded():
    ds = gen_sine(60, seed=1)
    model = init_model(Architecture(4, (3,), 2), 0)
    cfg = TrainConfig(epochs=2, batch_size=10, learning_rate=0.1)
    a = dp_train(model, ds.features, ds.labels, cfg, 1.0, noise_seed=5)
    b = dp_train(model, ds.features, ds.labels, cfg, 1.0, noise_seed=5)
    c = dp_train(model, ds.features, ds.labels, cfg, 1.0, noise_seed=6)
    assert a.equals(b)
    assert not a.equals(c)


def test_parse_method():
    assert parse_method("dp(0.5)") == ("dp", 0.5)
    assert parse_method(" IPDD ") == ("ipdd", None)
    for bad in ("dp", "magic", "dp(x)"):
        with pytest.raises(ValueError):
            parse_method(bad)


@pytest.fixture(scope="module")
def reversal_stream():
    return gen_sine(4000, DriftSpec("abrupt", (2000,)), seed=3)


def test_no_retrain_never_drifts_or_asks(reversal_stream):
    result = run_baseline("no_retrain", reversal_stream, FAST)
    assert result.drift_count == 0
    assert result.label_requests == 0
    assert result.retrain_count == 0


def test_unlimited_baseline_sees_every_label(reversal_stream):
    result = run_baseline("adwin_unlim", reversal_stream, FAST)
    assert result.label_requests == len(result.labels)
    # the error stream jumps at the reversal
    assert any(e.chunk_index >= 20 for e in result.drift_events)


def test_label_economy(reversal_stream):
    for name in ("ipdd", "adwin_lim", "dp(1.0)"):
        result = run_method(name, reversal_stream, FAST)
        assert result.label_requests == sum(e.labels_requested for e in result.drift_events)
        assert result.retrain_count == result.drift_count


def test_run_is_deterministic(reversal_stream):
    a = run_ipdd(reversal_stream, FAST)
    b = run_ipdd(reversal_stream, FAST)
    np.testing.assert_array_equal(a.predictions, b.predictions)
    np.testing.assert_array_equal(a.probabilities, b.probabilities)
    assert [vars(e) for e in a.drift_events] == [vars(e) for e in b.drift_events]


def test_result_layout(reversal_stream):
    result = run_ipdd(reversal_stream, FAST)
    assert len(result.predictions) == 3600
    assert result.chunk_starts[0] == 400
    assert sum(result.chunk_sizes) == 3600
    assert result.uncertainty.min() >= 0
    assert result.uncertainty.max() <= math.log(2) + 1e-12
    assert result.ensemble_sizes[0] <= FAST.k


def test_unknown_baseline(reversal_stream):
    with pytest.raises(ValueError):
        run_baseline("oracle", reversal_stream, FAST)
    with pytest.raises(ValueError):
        run_baseline("dp", reversal_stream, FAST)


def test_stationary_stream_rarely_drifts():
    counts = [run_ipdd(gen_sine(5000, seed=100 + s), StreamConfig(m=10, seed=s)).drift_count for s in range(20)]
    assert np.mean(counts) <= 1


def test_failed_retrain_is_reported(monkeypatch):
    real_builder = stream._ipdd_builder

    def failing_builder(cfg, arch):
        inner = real_builder(cfg, arch)

        def build(X, y, rebuild):
            if rebuild:
                raise ValueError("boom")
            return inner(X, y, rebuild)

        return build

    monkeypatch.setattr(stream, "_ipdd_builder", failing_builder)
    ds = gen_sine(10_000, DriftSpec("abrupt", (5000,), feature_shift=0.5), seed=0)
    with pytest.raises(RetrainError, match="chunk"):
        run_ipdd(ds, StreamConfig(m=10, seed=0))


def test_visible_drift_is_detected_and_recovered():
    # the feature shift makes the change visible to the label-free signal
    hits = 0
    for seed in range(5):
        ds = gen_sine(10_000, DriftSpec("abrupt", (5000,), feature_shift=0.5), seed=seed)
        result = run_ipdd(ds, StreamConfig(m=10, seed=seed))
        acc = result.chunk_accuracy()
        drift_chunk = 20
        after = [e.chunk_index for e in result.drift_events if e.chunk_index >= drift_chunk]
        if not after or after[0] > drift_chunk + 5:
            continue
        pre = acc[drift_chunk - 5 : drift_chunk].mean()
        post = acc[after[0] + 1 : after[0] + 6].max()
        hits += post >= pre - 0.1
    assert hits >= 4
