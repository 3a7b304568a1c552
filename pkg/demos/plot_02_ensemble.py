"""
Integrally private ensembles and k-anonymity
============================================

Train many models from one shared initialization on disjoint subsamples,
group them into Delta-buckets and keep the means of the largest buckets.
"""

from ipdd.datasets import gen_sine
from ipdd.ensemble import build_ensemble, derive_seed, generate_subsamples, kanonymity_report, max_bucket_size, train_on_subsamples
from ipdd.nn import Architecture, TrainConfig

pool = gen_sine(10_000, seed=1)
arch = Architecture.named("ann", 4, 2)

# a short training run keeps the models close together
quick = TrainConfig(epochs=5, batch_size=10, learning_rate=0.1)
ensemble, buckets = build_ensemble(pool.features, pool.labels, arch, quick, N=100, m=50, delta=0.1, k=5, seed=0)
report = kanonymity_report(buckets, ensemble.subsamples)
print("bucket sizes", report.sizes)
print("achieved k", report.k, "subsamples disjoint", report.disjoint)
print("ensemble keeps", ensemble.effective_k, "bucket means")

# re-bucketing the same models: larger Delta never yields smaller buckets here
subs = generate_subsamples(len(pool), 100, 50, derive_seed(0, 1))
models = train_on_subsamples(pool.features, pool.labels, arch, quick, subs, seed=0)
for delta in (1e-4, 1e-3, 1e-2, 1e-1, 0.2):
    print(f"delta={delta:<7} largest bucket {max_bucket_size(models, delta)}")
