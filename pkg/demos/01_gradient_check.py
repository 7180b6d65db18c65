"""Check the hand-written backward pass against finite differences.

Every trainable array of the network is perturbed entry by entry on a
reduced-size model (so the script runs in a second or two), for each
ablation variant.
"""

import numpy as np

from somno import model as mdl
from somno import nn


def numeric(loss, arr, h=1e-5):
    g = np.zeros_like(arr)
    for i in np.ndindex(arr.shape):
        old = arr[i]
        arr[i] = old + h
        up = loss()
        arr[i] = old - h
        g[i] = (up - loss()) / (2 * h)
        arr[i] = old
    return g


rng = np.random.default_rng(0)
x = rng.normal(size=(6, 48))
y = np.array([0, 1, 0, 1, 1, 0])

for variant in ("Full", "NoActiv", "NoBatchNorm", "AvgPool10"):
    cfg = mdl.ModelConfig.from_name(variant, input_len=48, kernel_len=8, num_filters=4)
    params = mdl.init_model(cfg)
    params.bn_beta[:] = rng.normal(size=4)
    _, grads = mdl.loss_and_grads(x, y, params, cfg)  # dropout is off outside training
    loss = lambda: nn.cross_entropy_loss(mdl.forward(x, params, cfg)[0], y)
    worst = 0.0
    for name, arr in params.as_dict().items():
        num = numeric(loss, arr)
        scale = np.maximum(np.maximum(np.abs(num), np.abs(grads[name])), 1e-6)
        worst = max(worst, float(np.max(np.abs(num - grads[name]) / scale)))
    print(f"{variant:12s} {params.size:4d} parameters, max relative error {worst:.1e}")
