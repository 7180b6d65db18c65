"""Numerical kernels for the compact 1D CNN, with hand-derived gradients.

Feature tensors are laid out ``(batch, channels, positions)``.  Every
function is pure: forward functions return whatever the matching backward
function needs, nothing is stored on module state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBatchError, DimensionError, LabelError

PROB_FLOOR = 1e-12


def shifted_stack(x: np.ndarray, kernel_len: int) -> np.ndarray:
    """Lagged copies of the input: ``out[b, t, j] = x[b, j + t]``, shape (batch, kernel_len, n)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"expected (batch, length) input, got shape {x.shape}")
    if x.shape[1] < kernel_len:
        raise DimensionError(
            f"input length {x.shape[1]} is shorter than kernel length {kernel_len}"
        )
    n = x.shape[1] - kernel_len + 1
    out = np.empty((x.shape[0], kernel_len, n))
    for t in range(kernel_len):
        out[:, t, :] = x[:, t : t + n]
    return out


def conv1d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray, lagged=None) -> np.ndarray:
    """Valid, stride-1 cross-correlation of single-channel signals.

    Parameters
    ----------
    x : ndarray, shape (batch, length)
    kernels : ndarray, shape (num_filters, kernel_len)
    bias : ndarray, shape (num_filters,)
    lagged : ndarray, optional
        Precomputed ``shifted_stack(x, kernel_len)``.

    Returns
    -------
    ndarray, shape (batch, num_filters, length - kernel_len + 1)
        ``out[b, k, j] = bias[k] + sum_t kernels[k, t] * x[b, j + t]``.
    """
    if lagged is None:
        lagged = shifted_stack(x, kernels.shape[1])
    out = kernels @ lagged
    out += bias[:, None]
    return out


def conv1d_backward(dout: np.ndarray, x: np.ndarray, kernel_len: int, lagged=None):
    """Gradients of a first-layer convolution w.r.t. kernels and biases.

    The input gradient is never needed (the convolution sits on raw data)
    and is not computed.
    """
    if lagged is None:
        lagged = shifted_stack(x, kernel_len)
    dk = np.matmul(dout, lagged.transpose(0, 2, 1)).sum(axis=0)
    db = dout.sum(axis=(0, 2))
    return dk, db


@dataclass
class BatchNormCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray


def batchnorm_forward(x, gamma, beta, eps=1e-5):
    """Per-channel normalisation with statistics of the current batch.

    Mean and (biased) variance are taken over all batch and position
    entries of each channel.  There are no running averages: inference
    also normalises with the statistics of whatever batch it is given.
    """
    if x.ndim != 3:
        raise DimensionError(f"expected (batch, channels, positions), got {x.shape}")
    if x.shape[0] * x.shape[2] < 2:
        raise DegenerateBatchError(
            "batch normalisation needs at least two entries per channel"
        )
    count = x.shape[0] * x.shape[2]
    mean = np.einsum("bmn->m", x) / count
    xhat = x - mean[:, None]
    var = np.einsum("bmn,bmn->m", xhat, xhat) / count
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat *= inv_std[:, None]
    out = xhat * gamma[:, None]
    out += beta[:, None]
    return out, BatchNormCache(xhat=xhat, inv_std=inv_std, gamma=gamma)


def batchnorm_backward(dout, cache: BatchNormCache):
    """Backward pass through batch-statistics normalisation.

    Gradients flow through the batch mean and variance, so the input
    gradient is not simply ``gamma * inv_std * dout``.
    """
    xhat = cache.xhat
    count = xhat.shape[0] * xhat.shape[2]
    dgamma = np.einsum("bmn,bmn->m", dout, xhat)
    dbeta = np.einsum("bmn->m", dout)
    # dxhat = gamma * dout, folded into the per-channel coefficients below
    scale = (cache.gamma * cache.inv_std)[:, None]
    dx = xhat * (-dgamma / count)[:, None]
    dx -= (dbeta / count)[:, None]
    dx += dout
    dx *= scale
    return dx, dgamma, dbeta


def elu(x, alpha=1.0):
    """Exponential linear unit: ``x`` for ``x >= 0``, ``alpha*(exp(x)-1)`` below."""
    x = np.asarray(x, dtype=np.float64)
    neg = np.expm1(np.minimum(x, 0.0))
    if alpha != 1.0:
        neg *= alpha
    return np.maximum(x, 0.0) + neg


def elu_backward(dout, x, out, alpha=1.0):
    # out + alpha equals alpha*exp(x) on the negative side
    if alpha == 1.0:
        slope = np.minimum(out, 0.0)
        slope += 1.0
    else:
        slope = np.where(x >= 0, 1.0, out + alpha)
    slope *= dout
    return slope


def global_average_pool(x):
    """Mean over the position axis: ``(batch, channels, positions) -> (batch, channels)``."""
    if x.shape[-1] < 1:
        raise DimensionError("cannot pool an empty position axis")
    return x.mean(axis=-1)


def global_average_pool_backward(dout, positions):
    return np.broadcast_to((dout / positions)[:, :, None], dout.shape + (positions,))


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def dense_forward(x, weights, bias):
    if x.shape[1] != weights.shape[0]:
        raise DimensionError(
            f"dense layer expects {weights.shape[0]} features, got {x.shape[1]}"
        )
    return x @ weights + bias


def dense_softmax(x, weights, bias):
    """Dense layer followed by a row-wise, max-shifted softmax."""
    return softmax(dense_forward(x, weights, bias))


def _check_labels(labels, num_classes):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise LabelError("labels must be a 1-D integer array")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f"labels must lie in [0, {num_classes - 1}]")
    return labels.astype(np.intp)


def cross_entropy_loss(probs, labels):
    """Mean negative log-likelihood of the true class, probabilities floored at 1e-12."""
    labels = _check_labels(labels, probs.shape[1])
    picked = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def softmax_cross_entropy_backward(probs, labels):
    """Gradient of the mean cross-entropy with respect to the logits."""
    labels = _check_labels(labels, probs.shape[1])
    grad = probs.copy()
    grad[np.arange(len(labels)), labels] -= 1.0
    return grad / len(labels)


def avg_pool_forward(x, pool_size):
    """Non-overlapping window average along positions; the ragged tail is dropped."""
    b, m, n = x.shape
    windows = n // pool_size
    if windows < 1:
        raise DimensionError(f"pool size {pool_size} exceeds {n} positions")
    return x[:, :, : windows * pool_size].reshape(b, m, windows, pool_size).mean(axis=3)


def avg_pool_backward(dout, pool_size, positions):
    b, m, windows = dout.shape
    dx = np.zeros((b, m, positions))
    dx[:, :, : windows * pool_size] = np.repeat(dout / pool_size, pool_size, axis=2)
    return dx


@dataclass
class AdamConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class Adam:
    """Adam with bias-corrected moments, updating a dict of arrays in place."""

    config: AdamConfig = field(default_factory=AdamConfig)
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        cfg = self.config
        for name, p in params.items():
            if grads[name].shape != p.shape:
                raise DimensionError(
                    f"gradient for {name!r} has shape {grads[name].shape}, "
                    f"parameter has {p.shape}"
                )
            if name in self.m and self.m[name].shape != p.shape:
                raise DimensionError(f"moment buffer for {name!r} has the wrong shape")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - cfg.beta1**t
        bc2 = 1.0 - cfg.beta2**t
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)


def adam_step(params: dict, grads: dict, optimizer: Adam) -> dict:
    """Functional wrapper: apply one Adam update in place and return ``params``."""
    optimizer.step(params, grads)
    return params
