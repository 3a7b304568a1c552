"""
Training a small network from scratch
=====================================

Build the two named architectures, check backprop against finite
differences, then fit the shallow network on a stationary Sine stream.
"""

import numpy as np

from ipdd.datasets import gen_sine
from ipdd.nn import Architecture, TrainConfig, forward, init_model, loss_and_grads, model_distance, train

# the shallow and the deep network used throughout the package
ann = Architecture.named("ann", 4, 2)
dnn = Architecture.named("dnn", 4, 2)
print("ann layers", ann.layer_sizes, "params", ann.n_params)
print("dnn layers", dnn.layer_sizes, "params", dnn.n_params)

# backprop against a central difference on one coordinate
data = gen_sine(2000, seed=0)
model = init_model(ann, seed=0)
X, y = data.features[:32], data.labels[:32]
_, gw, gb = loss_and_grads(model, X, y)
theta = model.flat()
h = 1e-5
bump = np.zeros_like(theta)
# the last coordinate of the flat vector is the final output bias
bump[-1] = h
up = loss_and_grads(model.with_flat(theta + bump), X, y)[0]
down = loss_and_grads(model.with_flat(theta - bump), X, y)[0]
print("analytic", gb[-1][-1], "numeric", (up - down) / (2 * h))

# plain minibatch SGD
trained = train(model, data.features[:1500], data.labels[:1500], TrainConfig(epochs=50))
probs = forward(trained, data.features[1500:])
print("held-out accuracy", float((probs.argmax(axis=1) == data.labels[1500:]).mean()))

# the distance behind Delta-equivalence: worst neuron, incoming weights plus bias
print("distance moved by training", model_distance(model, trained))
