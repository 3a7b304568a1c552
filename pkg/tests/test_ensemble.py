import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipdd.datasets import blobs, gen_sine
from ipdd.ensemble import (
    InsufficientDataError,
    bucket_models,
    build_ensemble,
    derive_seed,
    generate_subsamples,
    kanonymity_report,
    max_bucket_size,
    train_on_subsamples,
)
from ipdd.nn import Architecture, TrainConfig, init_model, mean_models, model_distance

ARCH = Architecture(3, (4,), 2)


def _shifted(base, index, amount):
    flat = base.flat().copy()
    flat[index] += amount
    return base.with_flat(flat)


def test_partition_of_the_pool():
    subs = generate_subsamples(100, 10, 10, seed=1)
    assert len(subs) == 10
    joined = np.concatenate(subs.subsamples)
    assert len(np.unique(joined)) == 100
    assert subs.pairwise_disjoint()


def test_insufficient_pool():
    with pytest.raises(InsufficientDataError):
        generate_subsamples(100, 60, 2, seed=0)


def test_subsamples_are_seeded():
    a = generate_subsamples(500, 20, 7, seed=3)
    b = generate_subsamples(500, 20, 7, seed=3)
    np.testing.assert_array_equal(a.as_matrix(), b.as_matrix())
    assert not np.array_equal(a.as_matrix(), generate_subsamples(500, 20, 7, seed=4).as_matrix())


@settings(max_examples=40, deadline=None)
@given(pool=st.integers(1, 400), n=st.integers(1, 40), m=st.integers(1, 20), seed=st.integers(0, 2**31))
def test_subsamples_disjoint_property(pool, n, m, seed):
    if n * m > pool:
        with pytest.raises(InsufficientDataError):
            generate_subsamples(pool, n, m, seed)
        return
    subs = generate_subsamples(pool, n, m, seed)
    assert subs.pairwise_disjoint()
    assert all(len(s) == n for s in subs.subsamples)
    assert subs.as_matrix().max() < pool


def test_identical_models_share_one_bucket():
    model = init_model(ARCH, 0)
    buckets = bucket_models([model] * 6, 1e-9)
    assert len(buckets) == 1
    assert buckets[0].k == 6


def test_far_apart_models_are_singletons():
    base = init_model(ARCH, 0)
    models = [_shifted(base, 0, 1.0 * i) for i in range(5)]
    buckets = bucket_models(models, 0.5)
    assert [b.k for b in buckets] == [1] * 5


def test_first_fit_against_the_representative():
    # d(1,2) = 0.005, d(1,3) = 0.007, d(2,3) = 0.012 > delta
    m1 = init_model(ARCH, 0)
    m2 = _shifted(m1, 0, 0.005)
    m3 = _shifted(m1, 0, -0.007)
    assert model_distance(m1, m2) == pytest.approx(0.005)
    assert model_distance(m1, m3) == pytest.approx(0.007)
    assert model_distance(m2, m3) == pytest.approx(0.012)
    buckets = bucket_models([m1, m2, m3], 0.01)
    assert len(buckets) == 1
    assert buckets[0].source_subsample_ids == [0, 1, 2]
    assert kanonymity_report(buckets).k == 3


def test_greedy_order_matters():
    # starting from model 2 the bucket cannot hold model 3
    m1 = init_model(ARCH, 0)
    m2 = _shifted(m1, 0, 0.005)
    m3 = _shifted(m1, 0, -0.007)
    assert [b.k for b in bucket_models([m2, m1, m3], 0.01)] == [2, 1]


def test_buckets_sorted_by_size_then_creation():
    base = init_model(ARCH, 0)
    a, b = base, _shifted(base, 0, 5.0)
    buckets = bucket_models([a, b, b, a, b], 0.1)
    assert [bk.k for bk in buckets] == [3, 2]
    assert buckets[0].source_subsample_ids == [1, 2, 4]


def test_bucketing_is_deterministic():
    rng = np.random.default_rng(0)
    base = init_model(ARCH, 0)
    models = [base.with_flat(base.flat() + rng.normal(0, 0.05, ARCH.n_params)) for _ in range(12)]
    first = bucket_models(models, 0.1)
    second = bucket_models(models, 0.1)
    assert [b.source_subsample_ids for b in first] == [b.source_subsample_ids for b in second]


def test_bucketing_rejects_empty():
    with pytest.raises(ValueError):
        bucket_models([], 0.1)


def test_report_extremes():
    base = init_model(ARCH, 0)
    singletons = bucket_models([_shifted(base, 0, float(i)) for i in range(4)], 0.1)
    assert kanonymity_report(singletons).k == 1
    assert kanonymity_report(bucket_models([base] * 4, 0.1)).k == 4


def test_report_flags_repeated_sources():
    base = init_model(ARCH, 0)
    buckets = bucket_models([base, base], 0.1, source_ids=[3, 3])
    assert not kanonymity_report(buckets).disjoint


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(0, i) for i in range(100)}) == 100


def test_huge_delta_gives_one_bucket_and_the_mean():
    ds = blobs(600, seed=0)
    arch = Architecture(2, (3,), 2)
    cfg = TrainConfig(epochs=3, batch_size=10, learning_rate=0.1)
    ens, buckets = build_ensemble(ds.features, ds.labels, arch, cfg, 50, 8, delta=1e9, k=1, seed=4)
    assert len(buckets) == 1
    assert ens.effective_k == 1
    assert ens.bucket_sizes == [8]
    subs = generate_subsamples(600, 50, 8, derive_seed(4, 7777))
    models = train_on_subsamples(ds.features, ds.labels, arch, cfg, subs, 4)
    np.testing.assert_allclose(ens.members[0].flat(), mean_models(models).flat(), atol=1e-15)


def test_fewer_buckets_than_k_warns(caplog):
    ds = blobs(400, seed=0)
    arch = Architecture(2, (3,), 2)
    cfg = TrainConfig(epochs=2, batch_size=10, learning_rate=0.1)
    with caplog.at_level(logging.WARNING):
        ens, _ = build_ensemble(ds.features, ds.labels, arch, cfg, 40, 5, delta=1e9, k=3, seed=0)
    assert ens.effective_k == 1 and ens.requested_k == 3
    assert ens.warning and "fewer" in ens.warning
    assert any("fewer" in r.message for r in caplog.records)


def test_default_subsample_size_uses_whole_pool():
    ds = blobs(100, seed=0)
    ens, _ = build_ensemble(
        ds.features, ds.labels, Architecture(2, (2,), 2), TrainConfig(1, 5, 0.1), None, 4, 0.1, 2, seed=0
    )
    assert ens.subsamples.size == 25


def test_shared_initialization():
    ds = blobs(200, seed=0)
    subs = generate_subsamples(200, 20, 3, 0)
    models = train_on_subsamples(ds.features, ds.labels, Architecture(2, (3,), 2), TrainConfig(1, 10, 0.0), subs, 9)
    # zero learning rate leaves every model at the shared start
    assert models[0].equals(models[1]) and models[1].equals(models[2])
    spread = train_on_subsamples(
        ds.features, ds.labels, Architecture(2, (3,), 2), TrainConfig(1, 10, 0.0), subs, 9, init_count=3
    )
    assert not spread[0].equals(spread[1])


def test_sine_ensemble_invariants_and_delta_trend():
    ds = gen_sine(10_000, seed=0)
    arch = Architecture.named("ann", 4, 2)
    cfg = TrainConfig(epochs=5, batch_size=10, learning_rate=0.3)
    ens, buckets = build_ensemble(ds.features, ds.labels, arch, cfg, 400, 20, 0.01, 5, seed=1)
    assert ens.subsamples.pairwise_disjoint()
    for b in buckets:
        assert all(model_distance(b.representative, m) <= 0.01 for m in b.members)
    for member, b in zip(ens.members, buckets):
        assert model_distance(member, b.representative) <= 0.01
    models = [m for b in buckets for m in b.members]
    assert max_bucket_size(models, 0.1) >= max_bucket_size(models, 1e-4)
