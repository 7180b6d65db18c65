"""Band-power features and the classical classifiers they are compared with."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError

BANDS = {
    "delta": (1.0, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 12.0),
    "beta": (12.0, 30.0),
}
BAND_NAMES = tuple(BANDS)


@dataclass
class PsdEstimate:
    frequencies: np.ndarray
    power: np.ndarray


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (the DFT-even form used for spectral averaging)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def welch_psd(signal, fs: float = 128.0, segment_len: int = 128, overlap: float = 0.5) -> PsdEstimate:
    """One-sided power spectral density by averaging Hann-windowed periodograms.

    Each segment has its mean removed before windowing.  The density is
    scaled so that ``sum(power) * df`` approximates the signal variance.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("welch_psd expects a 1-D signal")
    if segment_len > len(x):
        raise DimensionError(f"segment length {segment_len} exceeds signal length {len(x)}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    step = max(1, int(round(segment_len * (1.0 - overlap))))
    starts = range(0, len(x) - segment_len + 1, step)
    segs = np.stack([x[s : s + segment_len] for s in starts])
    segs = segs - segs.mean(axis=1, keepdims=True)
    w = hann(segment_len)
    spec = np.abs(np.fft.rfft(segs * w, axis=1)) ** 2
    power = spec.mean(axis=0) / (fs * np.sum(w * w))
    # fold negative frequencies; DC and (even-length) Nyquist appear once
    if segment_len % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    freqs = np.fft.rfftfreq(segment_len, d=1.0 / fs)
    return PsdEstimate(freqs, power)


def relative_band_powers(psd: PsdEstimate) -> np.ndarray:
    """Delta, theta, alpha and beta power as fractions of their 1-30 Hz total.

    Bands are half-open ``[lo, hi)`` except beta, which includes 30 Hz.
    """
    f, p = psd.frequencies, psd.power
    if f.min() > 1.0 or f.max() < 30.0:
        raise DataError("PSD must cover 1-30 Hz")
    totals = []
    for name, (lo, hi) in BANDS.items():
        mask = (f >= lo) & ((f <= hi) if name == "beta" else (f < hi))
        totals.append(p[mask].sum())
    totals = np.array(totals)
    denom = totals.sum()
    if not denom > 0:
        raise DataError("signal has no power between 1 and 30 Hz")
    return totals / denom


def band_power_features(signal, fs: float = 128.0) -> dict:
    return dict(zip(BAND_NAMES, relative_band_powers(welch_psd(signal, fs=fs)).tolist()))


def feature_matrix(samples, fs: float = 128.0) -> np.ndarray:
    """Relative band powers for every row of ``samples``: shape ``(N, 4)``."""
    return np.array([relative_band_powers(welch_psd(s, fs=fs)) for s in np.asarray(samples)])


# --- classifiers -------------------------------------------------------------


def _check_fit_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionError("features must be (N, d) with one label per row")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise DataError("both classes must be present to fit a classifier")
    return X, y


@dataclass(frozen=True)
class LdaModel:
    weights: np.ndarray  # (2, d) discriminant slopes
    offsets: np.ndarray  # (2,)

    def decision(self, X) -> np.ndarray:
        return np.atleast_2d(X) @ self.weights.T + self.offsets

    def predict(self, X) -> np.ndarray:
        d = self.decision(X)
        return (d[:, 1] > d[:, 0]).astype(np.intp)


def lda_fit(X, y) -> LdaModel:
    """Linear discriminant with a pooled maximum-likelihood covariance.

    A ridge of ``1e-6 * trace / d`` keeps the covariance invertible (an
    absolute ``1e-6`` when the covariance vanishes).
    """
    X, y = _check_fit_inputs(X, y)
    d = X.shape[1]
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    resid = X - means[y]
    cov = resid.T @ resid / len(X)
    tr = np.trace(cov)
    cov = cov + (1e-6 * tr / d if tr > 0 else 1e-6) * np.eye(d)
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    slopes = np.linalg.solve(cov, means.T).T
    offsets = -0.5 * np.sum(slopes * means, axis=1) + np.log(priors)
    return LdaModel(slopes, offsets)


def lda_predict(model: LdaModel, X) -> np.ndarray:
    return model.predict(X)


@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray
    bias: float

    def proba(self, X) -> np.ndarray:
        z = np.atleast_2d(X) @ self.weights + self.bias
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def predict(self, X) -> np.ndarray:
        return (self.proba(X) >= 0.5).astype(np.intp)


def logreg_fit(X, y, l2: float = 1.0, tol: float = 1e-6, max_iter: int = 1000) -> LogRegModel:
    """L2-penalised logistic regression by full-batch gradient descent.

    Minimises ``mean(log-loss) + l2/2 * |w|^2`` (intercept unpenalised), so
    duplicating the training set leaves the optimum unchanged.  The step
    size is the inverse of the objective's Lipschitz constant.
    """
    X, y = _check_fit_inputs(X, y)
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(d + 1)
    reg = np.full(d + 1, l2)
    reg[-1] = 0.0
    lipschitz = 0.25 * np.linalg.norm(Xa, 2) ** 2 / n + l2
    step = 1.0 / lipschitz
    for _ in range(max_iter):
        p = 0.5 * (1.0 + np.tanh(0.5 * (Xa @ theta)))
        grad = Xa.T @ (p - y) / n + reg * theta
        if np.linalg.norm(grad) < tol:
            break
        theta -= step * grad
    return LogRegModel(theta[:-1].copy(), float(theta[-1]))


def logreg_predict(model: LogRegModel, X) -> np.ndarray:
    return model.predict(X)


@dataclass(frozen=True)
class GaussianNbModel:
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d)
    log_priors: np.ndarray  # (2,)

    def log_posterior(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        ll = -0.5 * np.sum(
            np.log(2.0 * np.pi * self.variances)[None]
            + (X[:, None, :] - self.means[None]) ** 2 / self.variances[None],
            axis=2,
        )
        return ll + self.log_priors

    def predict(self, X) -> np.ndarray:
        lp = self.log_posterior(X)
        return (lp[:, 1] > lp[:, 0]).astype(np.intp)


def gnb_fit(X, y, var_smoothing: float = 1e-9) -> GaussianNbModel:
    """Per-class Gaussian likelihoods with a variance floor added to every feature."""
    X, y = _check_fit_inputs(X, y)
    floor = var_smoothing * X.var(axis=0).max()
    if floor <= 0:
        floor = var_smoothing
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.stack([X[y == c].var(axis=0) for c in (0, 1)]) + floor
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    return GaussianNbModel(means, variances, np.log(priors))


def gnb_predict(model: GaussianNbModel, X) -> np.ndarray:
    return model.predict(X)


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = 5

    def predict(self, X) -> np.ndarray:
        return np.array([knn_predict((self.X, self.y), q, self.k) for q in np.atleast_2d(X)], dtype=np.intp)


def knn_fit(X, y, k: int = 5) -> KnnModel:
    X, y = _check_fit_inputs(X, y)
    if not 1 <= k <= len(X):
        raise ValueError(f"k must lie in [1, {len(X)}]")
    return KnnModel(X, y, k)


def knn_predict(train, query, k: int = 5) -> int:
    """Majority vote of the ``k`` nearest training points (Euclidean).

    Equal distances keep training order; a split vote goes to class 0.
    """
    X, y = train
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= len(X):
        raise ValueError(f"k must lie in [1, {len(X)}]")
    dist = np.sum((X - np.asarray(query, dtype=np.float64)) ** 2, axis=1)
    nearest = np.argsort(dist, kind="stable")[:k]
    votes = np.asarray(y)[nearest]
    return int(np.sum(votes == 1) > np.sum(votes == 0))


CLASSIFIERS = {
    "lda": lda_fit,
    "lr": logreg_fit,
    "gnb": gnb_fit,
    "knn": knn_fit,
}


def fit_classifier(method: str, X, y):
    try:
        fit = CLASSIFIERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(CLASSIFIERS)}") from None
    return fit(X, y)
