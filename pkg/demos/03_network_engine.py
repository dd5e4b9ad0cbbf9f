"""
Running the SELD and scene networks
===================================

Networks are plain-text layer lists; weights are a flat binary file. The same
engine runs the shipped CRNN, the scene classifier and scripted stand-ins.
"""
import numpy as np

from seld_edge.nn import Model, builtin_config, load_network, random_weights
from seld_edge.nn.complexity import REFERENCE_ASC, REFERENCE_SELD, complexity_report
from seld_edge.nn.stubs import stub_model

seld = load_network(builtin_config("seldnet"))
asc = load_network(builtin_config("asc"))
print(builtin_config("seldnet").read_text())

# parameter and multiply-accumulate counts next to the published figures
print(complexity_report(seld, REFERENCE_SELD))
print(complexity_report(asc, REFERENCE_ASC))

# untrained weights are enough to check shapes and timing
model = Model(seld, random_weights(seld, seed=0))
x = np.random.default_rng(0).standard_normal(seld.input_shape).astype(np.float32)
y = model.forward(x)
print("\nSELD output", y.shape, "range", y.min().round(3), y.max().round(3))

# a scripted model: a car horn fixed at 90 degrees with activity 0.9
spec, weights = stub_model("seld", "constant CarHorn 90 0.9")
y = Model(spec, weights).forward(x)
print("stub CarHorn x, y on frame 0:", y[0, 1].round(4), y[0, 7].round(4))
