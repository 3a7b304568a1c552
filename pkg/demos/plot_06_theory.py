"""
How often do independently trained models recur?
================================================

Compare the closed-form lower bounds on model recurrence with Monte Carlo
frequencies from tiny networks trained on disjoint subsamples.
"""

from ipdd.datasets import blobs
from ipdd.nn import Architecture, TrainConfig
from ipdd.theory import BoundInputs, bound_all_recurrence, bound_k_anonymity, bound_pair_recurrence, recurrence_sweep

# worked cases where q = sigma^2 / (b * Delta^2) is set directly
print("pair bound, m=2, q=0.5, T=1:", bound_pair_recurrence(BoundInputs(m=2, b=1, T=1, delta=1.0, sigma2=0.5)))
print("all bound, m=5, q=0.1, T=3:", bound_all_recurrence(BoundInputs(m=5, b=1, T=3, delta=1.0, sigma2=0.1)))
print("k=3 bound, m=4, q=0.5, T=1:", bound_k_anonymity(BoundInputs(m=4, b=1, T=1, delta=1.0, sigma2=0.5, k=3)))

# empirical recurrence for a 2-3-2 network
data = blobs(1000, seed=0)
arch = Architecture(2, (3,), 2)
cfg = TrainConfig(epochs=5, batch_size=10, learning_rate=0.1)
for est in recurrence_sweep(arch, data.features, data.labels, m=10, N=100,
                            deltas=[0.05, 0.2, 0.5, 1.0, 2.0], train_cfg=cfg, trials=30, seed=0):
    print(f"delta={est.delta:<5} bound {est.bound:.3f} +/- {est.standard_error:.3f}  observed {est.recur_freq:.3f}")
