"""Static SVG plot of BER curves (log-y), deterministic byte-for-byte."""

from __future__ import annotations

import math

__all__ = ["emit_plot"]

_W, _H = 720, 540
_ML, _MR, _MT, _MB = 70, 30, 30, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def emit_plot(series: dict, path: str) -> None:
    """Write one log-y BER-vs-SNR SVG with a polyline per detector.

    ``series`` maps a label to a list of BerPoint (or any object with
    ``snr_db`` and ``ber``).  Zero-BER points are dropped; a series with
    no plottable point is an error.
    """
    if not series:
        raise ValueError("no series to plot")
    cleaned = {}
    for name, pts in series.items():
        kept = [(float(p.snr_db), float(p.ber)) for p in pts if p.ber > 0]
        if not kept:
            raise ValueError(f"series {name!r} has no nonzero-BER points")
        cleaned[name] = sorted(kept)

    xs = [x for pts in cleaned.values() for x, _ in pts]
    ys = [y for pts in cleaned.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    y_lo = 10 ** math.floor(math.log10(min(ys)))
    y_hi = 10 ** math.ceil(math.log10(max(ys)))
    if y_lo == y_hi:
        y_hi = y_lo * 10

    px_w = _W - _ML - _MR
    px_h = _H - _MT - _MB

    def sx(x):
        return _ML + px_w * (x - x_lo) / (x_hi - x_lo)

    def sy(y):
        return _MT + px_h * (math.log10(y_hi) - math.log10(y)) / (
            math.log10(y_hi) - math.log10(y_lo)
        )

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{px_w}" height="{px_h}" '
        f'fill="none" stroke="black"/>',
    ]
    # decade gridlines and y tick labels
    dec = int(math.log10(y_lo))
    while dec <= math.log10(y_hi) + 1e-9:
        yv = 10.0**dec
        if y_lo <= yv <= y_hi:
            py = sy(yv)
            out.append(
                f'<line x1="{_ML}" y1="{_fmt(py)}" x2="{_ML + px_w}" y2="{_fmt(py)}" '
                f'stroke="#cccccc" stroke-width="0.5"/>'
            )
            out.append(
                f'<text x="{_ML - 8}" y="{_fmt(py + 4)}" text-anchor="end" '
                f'font-size="12">1e{dec}</text>'
            )
        dec += 1
    # x ticks at integers spanning the range
    step = max(1, int(round((x_hi - x_lo) / 6)))
    xt = math.ceil(x_lo)
    while xt <= x_hi + 1e-9:
        px = sx(xt)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{_MT + px_h}" x2="{_fmt(px)}" '
            f'y2="{_MT + px_h + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{_MT + px_h + 20}" text-anchor="middle" '
            f'font-size="12">{xt:g}</text>'
        )
        xt += step
    out.append(
        f'<text x="{_ML + px_w // 2}" y="{_H - 15}" text-anchor="middle" '
        f'font-size="14">SNR (dB)</text>'
    )
    out.append(
        f'<text x="18" y="{_MT + px_h // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {_MT + px_h // 2})">BER</text>'
    )
    for idx, (name, pts) in enumerate(sorted(cleaned.items())):
        color = _COLORS[idx % len(_COLORS)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for x, y in pts:
            out.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>'
            )
        ly = _MT + 18 + 18 * idx
        out.append(
            f'<line x1="{_ML + px_w - 150}" y1="{ly - 4}" x2="{_ML + px_w - 120}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{_ML + px_w - 112}" y="{ly}" font-size="12">{name}</text>'
        )
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
