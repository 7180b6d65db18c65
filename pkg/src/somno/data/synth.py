"""Synthetic single-channel EEG with labelled, localised events.

Every sample is 1/f background noise with a subject-specific spectral tilt,
tonic alpha rhythm, tonic muscle activity and recording gain, plus exactly
one injected event whose window is recorded.  Drowsy samples carry an alpha spindle or a theta burst; alert
samples carry a muscle (EMG) episode or a slow sensor drift.  The event
window makes the generator a ground truth for both classifiers and
class activation maps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .container import ALERT, DROWSY, N_POINTS, SAMPLE_RATE, LabeledSet

DROWSY_EVENTS = ("spindle", "theta")
ALERT_EVENTS = ("emg", "drift")


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 8
    samples_per_class: int = 100
    drowsy_events: tuple = DROWSY_EVENTS
    alert_events: tuple = ALERT_EVENTS
    seed: int = 0
    amplitude_uv: float = 10.0  # background RMS at unit gain
    gain_spread: float = 0.5  # sd of log gain across subjects
    tilt_range: tuple = (0.8, 1.6)  # 1/f exponent range across subjects
    event_scale: float = 1.0  # multiplies every event amplitude
    tonic_alpha: float = 1.0  # max per-subject background alpha amplitude
    tonic_emg: float = 0.5  # max per-subject background muscle RMS

    def __post_init__(self):
        for name in self.drowsy_events:
            if name not in DROWSY_EVENTS:
                raise ValueError(f"unknown drowsy event {name!r}")
        for name in self.alert_events:
            if name not in ALERT_EVENTS:
                raise ValueError(f"unknown alert event {name!r}")
        if not self.drowsy_events or not self.alert_events:
            raise ValueError("each class needs at least one event type")


def pink_noise(rng, tilt: float, n: int = N_POINTS, fs: float = SAMPLE_RATE) -> np.ndarray:
    """Unit-variance noise with power falling as ``1/f**tilt`` above 0.5 Hz."""
    f = np.fft.rfftfreq(n, d=1.0 / fs)
    amp = np.zeros_like(f)
    band = f >= 0.5
    amp[band] = f[band] ** (-tilt / 2.0)
    spec = amp * (rng.normal(size=f.size) + 1j * rng.normal(size=f.size))
    x = np.fft.irfft(spec, n=n)
    return x / x.std()


def _window(rng, min_s: float, max_s: float, fs: float = SAMPLE_RATE):
    length = int(rng.integers(int(min_s * fs), int(max_s * fs) + 1))
    start = int(rng.integers(0, N_POINTS - length + 1))
    return start, start + length


def _raised_cosine(length: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * (np.arange(length) + 0.5) / length)


def _oscillation(rng, freq, length, fs=SAMPLE_RATE):
    t = np.arange(length) / fs
    return np.sin(2.0 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))


def inject_event(rng, kind: str, scale: float = 1.0):
    """Return ``(event, start, end)``: a length-384 waveform zero outside ``[start, end)``."""
    out = np.zeros(N_POINTS)
    if kind == "spindle":
        start, end = _window(rng, 0.75, 1.5)
        wave = _oscillation(rng, rng.uniform(9.5, 10.5), end - start) * _raised_cosine(end - start)
        wave *= rng.uniform(1.5, 2.5)
    elif kind == "theta":
        start, end = _window(rng, 1.0, 1.5)
        wave = _oscillation(rng, rng.uniform(4.5, 5.5), end - start) * _raised_cosine(end - start)
        wave *= rng.uniform(1.5, 2.5)
    elif kind == "emg":
        start, end = _window(rng, 0.5, 1.5)
        length = end - start
        spec = np.fft.rfft(rng.normal(size=length))
        f = np.fft.rfftfreq(length, d=1.0 / SAMPLE_RATE)
        spec[(f < 20.0) | (f > 45.0)] = 0.0
        burst = np.fft.irfft(spec, n=length)
        burst /= burst.std() + 1e-12
        taper = np.minimum(1.0, np.minimum(np.arange(length) + 1, length - np.arange(length)) / 8.0)
        wave = burst * taper * rng.uniform(1.0, 1.5)
    elif kind == "drift":
        start, end = _window(rng, 1.0, 2.0)
        wave = _raised_cosine(end - start) * rng.uniform(3.0, 4.0) * rng.choice([-1.0, 1.0])
    else:
        raise ValueError(f"unknown event type {kind!r}")
    out[start:end] = wave * scale
    return out, start, end


def band_noise(rng, lo: float, hi: float, n: int = N_POINTS, fs: float = SAMPLE_RATE) -> np.ndarray:
    """Unit-RMS noise confined to ``[lo, hi]`` Hz."""
    spec = np.fft.rfft(rng.normal(size=n))
    f = np.fft.rfftfreq(n, d=1.0 / fs)
    spec[(f < lo) | (f > hi)] = 0.0
    x = np.fft.irfft(spec, n=n)
    return x / (x.std() + 1e-12)


def synth_generate(spec: SynthSpec = SynthSpec()) -> LabeledSet:
    """Generate a balanced multi-subject set; ``events`` holds ``(type, start, end)`` per sample."""
    root = np.random.SeedSequence(spec.seed)
    values, subjects, labels, events = [], [], [], []
    lo, hi = spec.tilt_range
    for subject, child in enumerate(root.spawn(spec.n_subjects), start=1):
        rng = np.random.default_rng(child)
        gain = spec.amplitude_uv * np.exp(rng.normal(0.0, spec.gain_spread))
        tilt = rng.uniform(lo, hi)
        alpha_amp = rng.uniform(0.0, spec.tonic_alpha)
        alpha_freq = rng.uniform(9.0, 11.0)
        emg_rms = rng.uniform(0.0, spec.tonic_emg)
        t = np.arange(N_POINTS) / SAMPLE_RATE
        order = rng.permutation(np.repeat([ALERT, DROWSY], spec.samples_per_class))
        for label in order:
            kinds = spec.drowsy_events if label == DROWSY else spec.alert_events
            kind = kinds[int(rng.integers(len(kinds)))]
            event, start, end = inject_event(rng, kind, spec.event_scale)
            tonic = alpha_amp * np.sin(2 * np.pi * alpha_freq * t + rng.uniform(0, 2 * np.pi))
            tonic += emg_rms * band_noise(rng, 20.0, 45.0)
            values.append(gain * (pink_noise(rng, tilt) + tonic + event))
            subjects.append(subject)
            labels.append(int(label))
            events.append((kind, start, end))
    return LabeledSet(np.array(values), subjects, labels, events)


def write_annotations(data: LabeledSet, path) -> None:
    """Sidecar CSV ``sample_index,event_type,start,end`` (0-based, end exclusive)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_index", "event_type", "start", "end"])
        for i, (kind, start, end) in enumerate(data.events):
            writer.writerow([i, kind, start, end])


def read_annotations(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [(r["event_type"], int(r["start"]), int(r["end"])) for r in rows]
