"""Class activation maps for the GAP network and their centre-aligned heatmaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as mdl
from .errors import DataError, DegenerateBatchError, DimensionError


@dataclass
class ActivationMap:
    values: np.ndarray  # (map_len,)
    class_index: int


@dataclass
class Explanation:
    probs: np.ndarray  # (num_classes,)
    heatmaps: np.ndarray  # (num_classes, input_len), normalised
    maps: np.ndarray  # (num_classes, map_len), raw activation maps
    band_powers: dict


def activation_map(act_out: np.ndarray, dense_weights: np.ndarray, class_index: int) -> ActivationMap:
    """Per-position evidence for one class.

    ``act_out`` is the post-activation feature map of a single sample,
    shape ``(num_filters, map_len)``.  The result satisfies
    ``mean(values) + bias[c] == logit[c]`` for the GAP network.
    """
    if not 0 <= class_index < dense_weights.shape[1]:
        raise IndexError(f"class index {class_index} out of range")
    if act_out.shape[0] != dense_weights.shape[0]:
        raise DimensionError("feature map channels do not match dense weight rows")
    return ActivationMap(dense_weights[:, class_index] @ act_out, class_index)


def heatmap(amap, kernel_len: int, input_len: int) -> np.ndarray:
    """Shift an activation map onto the centre of the input it was computed from.

    Position ``j`` of the map summarises input samples ``j .. j+l-1``, so it
    is placed at the kernel centre.  Negative evidence is clipped to zero.
    The first and last ``l/2`` input positions ramp linearly from 0 to the
    clipped end values; the left ramp has slope ``2/(l-2)`` and the right
    ramp ``2/l``, so both hit zero exactly at the signal ends.
    """
    values = amap.values if isinstance(amap, ActivationMap) else np.asarray(amap, dtype=np.float64)
    half = kernel_len // 2
    if kernel_len % 2 or values.shape != (input_len - kernel_len + 1,):
        raise DimensionError(
            f"map of length {values.shape} does not fit kernel {kernel_len} and input {input_len}"
        )
    pos = np.maximum(values, 0.0)
    out = np.empty(input_len)
    i = np.arange(1, input_len + 1)  # 1-based input positions
    left = i < half
    right = i > input_len - half
    middle = ~left & ~right
    out[left] = (2 * i[left] - 2) / (kernel_len - 2) * pos[0]
    out[middle] = pos[i[middle] - half]  # M(i - l/2 + 1), 0-based
    out[right] = (2 * input_len - 2 * i[right]) / kernel_len * pos[-1]
    return out


def normalize_heatmap(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    top = h.max() if h.size else 0.0
    if top <= 0:
        return np.zeros_like(h)
    return h / top


def class_heatmaps(act_out, params: mdl.ModelParams, config: mdl.ModelConfig):
    """Raw maps ``(C, n)`` and normalised heatmaps ``(C, L)`` for every class."""
    maps = (params.dense_weights.T @ act_out)
    heat = np.stack(
        [normalize_heatmap(heatmap(m, config.kernel_len, config.input_len)) for m in maps]
    )
    return maps, heat


def explain(sample, bundle, params: mdl.ModelParams, config: mdl.ModelConfig, fs: float = 128.0) -> Explanation:
    """Explain one member of a test bundle.

    ``sample`` is either an index into ``bundle`` or the sample values
    themselves (which must then occur in the bundle).  The bundle supplies
    the batch-normalisation statistics exactly as bundle inference does, so
    the returned probabilities equal those of ``predict_bundle``.
    """
    from .baselines import band_power_features

    if config.variant == "avgpool":
        raise ValueError("class activation maps need a global-average-pooling variant")
    bundle = np.asarray(bundle, dtype=np.float64)
    if np.ndim(sample) == 0:
        index = int(sample)
        if not 0 <= index < len(bundle):
            raise DataError(f"sample {index} is not a member of the bundle of {len(bundle)}")
    else:
        index = locate_bundle_member(sample, bundle)
    if len(bundle) < 2:
        raise DegenerateBatchError("explanations need a bundle of at least two samples")
    probs, cache = mdl.forward(bundle, params, config)
    maps, heat = class_heatmaps(cache.act_out[index], params, config)
    bands = band_power_features(bundle[index], fs=fs)
    return Explanation(probs=probs[index], heatmaps=heat, maps=maps, band_powers=bands)


def locate_bundle_member(sample, bundle) -> int:
    """Index of ``sample`` inside ``bundle``; raises ``DataError`` when absent."""
    bundle = np.asarray(bundle)
    hits = np.flatnonzero(np.all(bundle == np.asarray(sample)[None, :], axis=1))
    if hits.size == 0:
        raise DataError("sample is not a member of the bundle")
    return int(hits[0])
