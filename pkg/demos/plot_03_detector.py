"""
Label-free change detection
===========================

Predictive entropy turns ensemble disagreement into a number per
instance, and ADWIN watches that number for a change in its mean.
"""

import numpy as np

from ipdd.detector import Adwin, predictive_entropy

# entropy of the ensemble-average distribution
print("uniform binary", predictive_entropy([[0.5, 0.5]]))
print("unanimous", predictive_entropy([[1.0, 0.0], [1.0, 0.0]]))
print("mixed", predictive_entropy([[0.9, 0.1], [0.5, 0.5]]))

# a Bernoulli stream whose rate jumps from 0.2 to 0.8 at index 1000
rng = np.random.default_rng(0)
stream = np.r_[rng.binomial(1, 0.2, 1000), rng.binomial(1, 0.8, 1000)].astype(float)
detector = Adwin(delta=0.001)
for i, value in enumerate(stream):
    if detector.update(value):
        print(f"change flagged at index {i}, window now {len(detector)} wide, mean {detector.mean:.3f}")

# a stationary stream stays quiet
quiet = Adwin(delta=0.001)
alarms = sum(quiet.update(v) for v in rng.uniform(size=10_000))
print("false alarms on 10k uniform values", alarms)
