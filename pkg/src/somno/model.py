"""The compact interpretable CNN: conv -> batch norm -> ELU -> GAP -> dense -> softmax.

Also hosts the ablation variants (no activation, no batch norm, window
average pooling with dropout), mini-batch Adam training, bundle inference
and the binary checkpoint format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import nn
from .errors import DataError, DegenerateBatchError, DimensionError, FormatError, StateError

VARIANTS = ("full", "no_activation", "no_batchnorm", "avgpool")
BN_EPSILON = 1e-5
ELU_ALPHA = 1.0


@dataclass(frozen=True)
class ModelConfig:
    input_len: int = 384
    kernel_len: int = 64
    num_filters: int = 32
    num_classes: int = 2
    variant: str = "full"
    pool_size: int = 0
    dropout_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.kernel_len > self.input_len:
            raise ValueError("kernel_len must not exceed input_len")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        if self.kernel_len % 2:
            raise ValueError("kernel_len must be even for heatmap centring")
        if self.variant == "avgpool":
            if not 1 <= self.pool_size <= self.map_len:
                raise ValueError("avgpool variant needs 1 <= pool_size <= map_len")
            if not 0.0 <= self.dropout_rate < 1.0:
                raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def map_len(self) -> int:
        return self.input_len - self.kernel_len + 1

    @property
    def dense_in(self) -> int:
        if self.variant == "avgpool":
            return self.num_filters * (self.map_len // self.pool_size)
        return self.num_filters

    @property
    def name(self) -> str:
        return {
            "full": "Full",
            "no_activation": "NoActiv",
            "no_batchnorm": "NoBatchNorm",
            "avgpool": f"AvgPool{self.pool_size}",
        }[self.variant]

    @classmethod
    def avgpool(cls, pool_size: int, **kwargs) -> "ModelConfig":
        """Average-pool variant whose dropout keeps as many nodes as GAP would.

        ``AvgPool40`` gives 8 windows per filter and drops 7/8 of them,
        ``AvgPool80`` gives 4 windows and drops 3/4.
        """
        windows = (kwargs.get("input_len", 384) - kwargs.get("kernel_len", 64) + 1) // pool_size
        return cls(variant="avgpool", pool_size=pool_size, dropout_rate=1.0 - 1.0 / windows, **kwargs)

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "ModelConfig":
        """Parse ``Full``, ``NoActiv``, ``NoBatchNorm`` or ``AvgPool<k>`` (case-insensitive)."""
        key = name.strip().lower().replace("_", "").replace("-", "")
        if key in ("full", "proposed"):
            return cls(**kwargs)
        if key in ("noactiv", "noactivation"):
            return cls(variant="no_activation", **kwargs)
        if key in ("nobatchnorm", "nobn"):
            return cls(variant="no_batchnorm", **kwargs)
        if key.startswith("avgpool") and key[7:].isdigit():
            return cls.avgpool(int(key[7:]), **kwargs)
        raise ValueError(f"unknown model variant {name!r}")


PARAM_NAMES = ("conv_kernels", "conv_bias", "bn_gamma", "bn_beta", "dense_weights", "dense_bias")


@dataclass
class ModelParams:
    conv_kernels: np.ndarray  # (num_filters, kernel_len)
    conv_bias: np.ndarray  # (num_filters,)
    bn_gamma: np.ndarray  # (num_filters,)
    bn_beta: np.ndarray  # (num_filters,)
    dense_weights: np.ndarray  # (dense_in, num_classes)
    dense_bias: np.ndarray  # (num_classes,)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.as_dict().items()})

    @property
    def size(self) -> int:
        return sum(v.size for v in self.as_dict().values())

    def equals(self, other: "ModelParams") -> bool:
        return all(np.array_equal(a, other.as_dict()[k]) for k, a in self.as_dict().items())


def init_model(config: ModelConfig) -> ModelParams:
    """Uniform fan-in initialisation; zero biases, unit scale, zero shift."""
    rng = np.random.default_rng(config.rng_seed)
    s = np.sqrt(1.0 / config.kernel_len)
    kernels = rng.uniform(-s, s, size=(config.num_filters, config.kernel_len))
    t = np.sqrt(1.0 / config.num_filters)
    weights = rng.uniform(-t, t, size=(config.dense_in, config.num_classes))
    m = config.num_filters
    return ModelParams(
        conv_kernels=kernels,
        conv_bias=np.zeros(m),
        bn_gamma=np.ones(m),
        bn_beta=np.zeros(m),
        dense_weights=weights,
        dense_bias=np.zeros(config.num_classes),
    )


@dataclass
class ForwardCache:
    x: np.ndarray
    lagged: np.ndarray
    conv_out: np.ndarray
    bn_cache: Optional[nn.BatchNormCache]
    bn_out: np.ndarray
    act_out: np.ndarray
    pooled: np.ndarray
    dropout_mask: Optional[np.ndarray]
    features: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def _as_batch(x, config: ModelConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != config.input_len:
        raise DimensionError(
            f"expected samples of length {config.input_len}, got array of shape {x.shape}"
        )
    return x


def forward(x, params: ModelParams, config: ModelConfig, training: bool = False, rng=None):
    """Run a batch through the network.

    Returns ``(probs, cache)``.  ``probs`` has shape ``(batch, num_classes)``;
    the cache holds every intermediate the backward pass and CAM need.
    Dropout (avgpool variants only) is active only when ``training`` is set,
    and then draws its mask from ``rng``.
    """
    x = _as_batch(x, config)
    lagged = nn.shifted_stack(x, config.kernel_len)
    conv_out = nn.conv1d_forward(x, params.conv_kernels, params.conv_bias, lagged)
    bn_cache = None
    if config.variant == "no_batchnorm":
        bn_out = conv_out
    else:
        bn_out, bn_cache = nn.batchnorm_forward(conv_out, params.bn_gamma, params.bn_beta, BN_EPSILON)
    if config.variant == "no_activation":
        act_out = bn_out
    else:
        act_out = nn.elu(bn_out, ELU_ALPHA)

    mask = None
    if config.variant == "avgpool":
        pooled = nn.avg_pool_forward(act_out, config.pool_size)
        features = pooled.reshape(len(x), -1)
        if training and config.dropout_rate > 0:
            if rng is None:
                rng = np.random.default_rng()
            keep = 1.0 - config.dropout_rate
            mask = (rng.random(features.shape) < keep) / keep
            features = features * mask
    else:
        pooled = nn.global_average_pool(act_out)
        features = pooled
    logits = nn.dense_forward(features, params.dense_weights, params.dense_bias)
    probs = nn.softmax(logits)
    cache = ForwardCache(x, lagged, conv_out, bn_cache, bn_out, act_out, pooled, mask, features, logits, probs)
    return probs, cache


def backward(cache: Optional[ForwardCache], labels, params: ModelParams, config: ModelConfig) -> dict:
    """Exact gradients of the mean cross-entropy for every parameter array."""
    if cache is None:
        raise StateError("backward() needs the cache returned by forward()")
    dlogits = nn.softmax_cross_entropy_backward(cache.probs, labels)
    grads = {
        "dense_weights": cache.features.T @ dlogits,
        "dense_bias": dlogits.sum(axis=0),
    }
    dfeat = dlogits @ params.dense_weights.T
    n = cache.act_out.shape[2]
    if config.variant == "avgpool":
        if cache.dropout_mask is not None:
            dfeat = dfeat * cache.dropout_mask
        dpool = dfeat.reshape(cache.pooled.shape)
        dact = nn.avg_pool_backward(dpool, config.pool_size, n)
    else:
        dact = nn.global_average_pool_backward(dfeat, n)
    if config.variant == "no_activation":
        dbn = dact
    else:
        dbn = nn.elu_backward(dact, cache.bn_out, cache.act_out, ELU_ALPHA)
    if config.variant == "no_batchnorm":
        dconv = dbn
        grads["bn_gamma"] = np.zeros_like(params.bn_gamma)
        grads["bn_beta"] = np.zeros_like(params.bn_beta)
    else:
        dconv, grads["bn_gamma"], grads["bn_beta"] = nn.batchnorm_backward(dbn, cache.bn_cache)
    grads["conv_kernels"], grads["conv_bias"] = nn.conv1d_backward(dconv, cache.x, config.kernel_len, cache.lagged)
    return grads


def loss_and_grads(x, labels, params, config, training=False, rng=None):
    probs, cache = forward(x, params, config, training=training, rng=rng)
    return nn.cross_entropy_loss(probs, labels), backward(cache, labels, params, config)


@dataclass
class TrainConfig:
    batch_size: int = 50
    epochs: int = 50
    optimizer: nn.AdamConfig = field(default_factory=nn.AdamConfig)
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 for batch normalisation")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


def batch_slices(n_samples: int, batch_size: int) -> list:
    """Mini-batch boundaries; a trailing batch of one sample is dropped."""
    bounds = [(i, min(i + batch_size, n_samples)) for i in range(0, n_samples, batch_size)]
    return [(a, b) for a, b in bounds if b - a >= 2]


@dataclass
class TrainResult:
    params: ModelParams
    losses: list  # mean training loss per epoch


EpochCallback = Callable[[int, ModelParams], None]


def train(
    x,
    labels,
    train_cfg: TrainConfig,
    model_cfg: ModelConfig,
    params: Optional[ModelParams] = None,
    on_epoch_end: Optional[EpochCallback] = None,
) -> TrainResult:
    """Shuffled mini-batch Adam on the mean cross-entropy.

    Initialisation uses ``model_cfg.rng_seed``; shuffling and dropout use a
    separate generator seeded from ``train_cfg.shuffle_seed`` so variants
    can share initial weights.  ``on_epoch_end(epoch, params)`` is called
    after every epoch with 1-based epoch numbers.
    """
    x = _as_batch(x, model_cfg)
    labels = np.asarray(labels, dtype=np.intp)
    if len(x) == 0:
        raise DataError("cannot train on an empty dataset")
    if len(labels) != len(x):
        raise DimensionError("labels and samples differ in length")
    if len(np.unique(labels)) < 2:
        raise DataError("training data must contain both classes")
    params = init_model(model_cfg) if params is None else params.copy()
    optimizer = nn.Adam(train_cfg.optimizer)
    rng = np.random.default_rng(train_cfg.shuffle_seed)
    slices = batch_slices(len(x), train_cfg.batch_size)
    losses = []
    store = params.as_dict()
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(len(x))
        total, count = 0.0, 0
        for a, b in slices:
            idx = order[a:b]
            loss, grads = loss_and_grads(x[idx], labels[idx], params, model_cfg, training=True, rng=rng)
            optimizer.step(store, grads)
            total += loss * (b - a)
            count += b - a
        losses.append(total / count)
        if on_epoch_end is not None:
            on_epoch_end(epoch, params)
    return TrainResult(params=params, losses=losses)


def predict_bundle(x, params: ModelParams, config: ModelConfig):
    """Classify a whole test subject in a single batch.

    Batch normalisation uses the statistics of the bundle itself, so the
    prediction for one sample depends on the other members of the bundle.
    Ties go to class 0.  Returns ``(labels, probs)``.
    """
    x = _as_batch(x, config)
    if len(x) < 2:
        raise DegenerateBatchError("bundle inference needs at least two samples")
    probs, _ = forward(x, params, config, training=False)
    return np.argmax(probs, axis=1), probs


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    return float(np.mean(predicted == np.asarray(labels)))


# --- checkpoint ------------------------------------------------------------

CKPT_MAGIC = b"ICNN"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sH")
_CKPT_CONFIG = struct.Struct("<IIIIBIdq")


def params_to_bytes(params: ModelParams, config: ModelConfig) -> bytes:
    parts = [
        _CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION),
        _CKPT_CONFIG.pack(
            config.input_len,
            config.kernel_len,
            config.num_filters,
            config.num_classes,
            VARIANTS.index(config.variant),
            config.pool_size,
            config.dropout_rate,
            config.rng_seed,
        ),
    ]
    for name in PARAM_NAMES:
        parts.append(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())
    return b"".join(parts)


def params_from_bytes(data: bytes):
    if len(data) < _CKPT_HEADER.size + _CKPT_CONFIG.size:
        raise FormatError("checkpoint is truncated inside its header", offset=len(data))
    magic, version = _CKPT_HEADER.unpack_from(data, 0)
    if magic != CKPT_MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}", offset=0)
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    fields = _CKPT_CONFIG.unpack_from(data, _CKPT_HEADER.size)
    input_len, kernel_len, filters, classes, variant, pool, rate, seed = fields
    if variant >= len(VARIANTS):
        raise FormatError(f"unknown variant code {variant}", offset=_CKPT_HEADER.size + 16)
    config = ModelConfig(
        input_len=input_len,
        kernel_len=kernel_len,
        num_filters=filters,
        num_classes=classes,
        variant=VARIANTS[variant],
        pool_size=pool,
        dropout_rate=rate,
        rng_seed=seed,
    )
    shapes = {
        "conv_kernels": (filters, kernel_len),
        "conv_bias": (filters,),
        "bn_gamma": (filters,),
        "bn_beta": (filters,),
        "dense_weights": (config.dense_in, classes),
        "dense_bias": (classes,),
    }
    offset = _CKPT_HEADER.size + _CKPT_CONFIG.size
    arrays = {}
    for name in PARAM_NAMES:
        count = int(np.prod(shapes[name]))
        end = offset + 8 * count
        if end > len(data):
            raise FormatError(f"checkpoint is truncated inside {name}", offset=len(data))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shapes[name]).astype(np.float64)
        offset = end
    if offset != len(data):
        raise FormatError("trailing bytes after checkpoint payload", offset=offset)
    return ModelParams(**arrays), config


def save_checkpoint(path, params: ModelParams, config: ModelConfig) -> None:
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(params, config))


def load_checkpoint(path):
    """Read ``(params, config)`` from a checkpoint file."""
    with open(path, "rb") as fh:
        return params_from_bytes(fh.read())


def with_seed(config: ModelConfig, seed: int) -> ModelConfig:
    return replace(config, rng_seed=int(seed))
