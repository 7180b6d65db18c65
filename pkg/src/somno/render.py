"""Dependency-free SVG and CSV exports for explanations and accuracy curves."""

from __future__ import annotations

import csv
from xml.sax.saxutils import escape

import numpy as np

from .baselines import BAND_NAMES

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
# blue -> cyan -> yellow -> red
_HEAT_STOPS = np.array([[0.0, 40, 60, 200], [0.35, 40, 190, 220], [0.7, 250, 210, 40], [1.0, 215, 30, 30]])


def heat_color(v: float) -> str:
    v = float(np.clip(v, 0.0, 1.0))
    rgb = [np.interp(v, _HEAT_STOPS[:, 0], _HEAT_STOPS[:, k]) for k in (1, 2, 3)]
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def explanation_svg(signal, heat, probs, band_powers: dict, title: str = "", class_names=("alert", "drowsy")) -> str:
    """Trace coloured by ``heat`` (values in [0, 1]) with a relative band-power bar chart."""
    signal = np.asarray(signal, dtype=np.float64)
    heat = np.asarray(heat, dtype=np.float64)
    width, height = 920, 300
    tx, ty, tw, th = 50, 50, 600, 200
    bx, bw = 700, 180
    lo, hi = float(signal.min()), float(signal.max())
    span = hi - lo if hi > lo else 1.0
    xs = tx + np.arange(len(signal)) * tw / max(len(signal) - 1, 1)
    ys = ty + th - (signal - lo) / span * th

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    head = " ".join(f"{escape(n)}={p:.3f}" for n, p in zip(class_names, probs))
    parts.append(f'<text x="{tx}" y="25" font-family="sans-serif" font-size="14">{escape(title)} {head}</text>')
    parts.append(f'<rect x="{tx}" y="{ty}" width="{tw}" height="{th}" fill="none" stroke="#999"/>')
    for i in range(len(signal) - 1):
        c = heat_color(0.5 * (heat[i] + heat[i + 1]))
        parts.append(
            f'<line x1="{_fmt(xs[i])}" y1="{_fmt(ys[i])}" x2="{_fmt(xs[i + 1])}" y2="{_fmt(ys[i + 1])}" '
            f'stroke="{c}" stroke-width="2"/>'
        )
    parts.append(f'<text x="{tx}" y="{ty + th + 20}" font-family="sans-serif" font-size="11">0 s</text>')
    parts.append(
        f'<text x="{tx + tw - 20}" y="{ty + th + 20}" font-family="sans-serif" font-size="11">'
        f"{len(signal) / 128:.0f} s</text>"
    )

    bar_w = bw / len(BAND_NAMES)
    for k, name in enumerate(BAND_NAMES):
        v = float(band_powers[name])
        h = v * th
        x = bx + k * bar_w
        parts.append(
            f'<rect x="{_fmt(x + 4)}" y="{_fmt(ty + th - h)}" width="{_fmt(bar_w - 8)}" height="{_fmt(h)}" '
            f'fill="{_PALETTE[k]}"/>'
        )
        parts.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{ty + th + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{name}</text>'
        )
        parts.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{_fmt(ty + th - h - 4)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{v:.2f}</text>'
        )
    parts.append(f'<rect x="{bx}" y="{ty}" width="{bw}" height="{th}" fill="none" stroke="#999"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_explanation_csv(path, signal, heatmaps, probs, band_powers: dict, class_names=("alert", "drowsy")) -> None:
    """Comment lines with probabilities and band powers, then one row per input position."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + ",".join(f"p_{n}={p!r}" for n, p in zip(class_names, map(float, probs))) + "\n")
        fh.write("# " + ",".join(f"{k}={float(v)!r}" for k, v in band_powers.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "signal"] + [f"heatmap_{n}" for n in class_names])
        for i, v in enumerate(signal):
            w.writerow([i + 1, repr(float(v))] + [repr(float(h[i])) for h in heatmaps])


def accuracy_chart_svg(curves: dict, title: str = "Mean accuracy vs epoch") -> str:
    """Line chart of ``{label: (mean, stderr)}`` with shaded standard-error bands."""
    width, height = 720, 420
    px, py, pw, ph = 60, 40, 520, 320
    epochs = max(len(m) for m, _ in curves.values())
    lows = [np.min(np.asarray(m) - np.asarray(s)) for m, s in curves.values()]
    lo = max(0.0, float(np.floor(min(lows) * 10) / 10))
    hi = 1.0
    span = hi - lo if hi > lo else 1.0

    def xy(e, a):
        x = px + (e - 1) * pw / max(epochs - 1, 1)
        y = py + ph - (a - lo) / span * ph
        return x, y

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{px}" y="25" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{px}" y="{py}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>',
    ]
    for tick in np.linspace(lo, hi, 6):
        _, y = xy(1, tick)
        parts.append(f'<text x="{px - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="10">{tick:.2f}</text>')
    for e in sorted({1, epochs, *range(10, epochs + 1, 10)}):
        x, _ = xy(e, lo)
        parts.append(f'<text x="{_fmt(x)}" y="{py + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{e}</text>')
    for k, (label, (mean, se)) in enumerate(curves.items()):
        mean, se = np.asarray(mean), np.asarray(se)
        color = _PALETTE[k % len(_PALETTE)]
        upper = [xy(e + 1, a) for e, a in enumerate(np.minimum(mean + se, hi))]
        lower = [xy(e + 1, a) for e, a in enumerate(np.maximum(mean - se, lo))]
        band = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in upper + lower[::-1])
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        line = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (xy(e + 1, a) for e, a in enumerate(mean)))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = py + 20 + 18 * k
        parts.append(f'<line x1="{px + pw + 15}" y1="{ly}" x2="{px + pw + 35}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{px + pw + 40}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
