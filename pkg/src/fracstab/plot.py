"""Dependency-free SVG plot of ensemble mean-square curves."""

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=80, right=20, top=30, bottom=50)


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


class _Frame:
    """Affine map from data coordinates to pixel coordinates."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if y_hi <= y_lo:
            pad = max(abs(y_lo), 1.0) * 0.5
            y_lo, y_hi = y_lo - pad, y_hi + pad
        self.x_lo, self.x_hi, self.y_lo, self.y_hi = x_lo, x_hi, y_lo, y_hi
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (np.asarray(x) - self.x_lo) / (self.x_hi - self.x_lo) * self.pw

    def py(self, y):
        return MARGIN["top"] + (self.y_hi - np.asarray(y)) / (self.y_hi - self.y_lo) * self.ph

    def data_x(self, px):
        return self.x_lo + (np.asarray(px) - MARGIN["left"]) / self.pw * (self.x_hi - self.x_lo)

    def data_y(self, py):
        return self.y_hi - (np.asarray(py) - MARGIN["top"]) / self.ph * (self.y_hi - self.y_lo)


def _points(fr, x, y):
    return " ".join(f"{a:.6f},{b:.6f}" for a, b in zip(fr.px(x), fr.py(y)))


def svg_text(stats, fit=None, title="mean-square response"):
    t = np.asarray(stats.times, dtype=float)
    m = np.asarray(stats.mean_sq, dtype=float)
    if len(t) == 0:
        raise ValueError("cannot plot empty statistics")
    ci = np.asarray(stats.ci_half_width, dtype=float)
    lo, hi = m - ci, m + ci
    overlay = None
    if fit is not None:
        overlay = fit.m_star_hat * np.exp(-fit.mu_hat * t)
    y_all = [lo, hi] + ([overlay] if overlay is not None else [])
    fr = _Frame(float(t[0]), float(t[-1]), float(min(map(np.min, y_all))),
                float(max(map(np.max, y_all))))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-x-range="{fr.x_lo!r} {fr.x_hi!r}" '
        f'data-y-range="{fr.y_lo!r} {fr.y_hi!r}" '
        f'data-plot-box="{MARGIN["left"]} {MARGIN["top"]} {fr.pw} {fr.ph}">',
        f"<title>{escape(title)}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    band = np.concatenate([np.stack([t, hi], 1), np.stack([t, lo], 1)[::-1]])
    out.append(f'<polygon id="ci-band" fill="#9ecae1" fill-opacity="0.5" stroke="none" '
               f'points="{_points(fr, band[:, 0], band[:, 1])}"/>')
    out.append(f'<polyline id="mean-sq" fill="none" stroke="#08519c" stroke-width="1.5" '
               f'points="{_points(fr, t, m)}"/>')
    if overlay is not None:
        out.append(f'<polyline id="fit" fill="none" stroke="#d94801" stroke-width="1.5" '
                   f'stroke-dasharray="6,4" points="{_points(fr, t, overlay)}"/>')

    x0, y0 = MARGIN["left"], MARGIN["top"] + fr.ph
    out.append(f'<g id="axes" stroke="black" font-family="sans-serif" font-size="11">')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + fr.pw}" y2="{y0}"/>')
    out.append(f'<line x1="{x0}" y1="{MARGIN["top"]}" x2="{x0}" y2="{y0}"/>')
    for v in _ticks(fr.x_lo, fr.x_hi):
        p = float(fr.px(v))
        out.append(f'<line x1="{p:.3f}" y1="{y0}" x2="{p:.3f}" y2="{y0 + 5}"/>')
        out.append(f'<text x="{p:.3f}" y="{y0 + 18}" text-anchor="middle" '
                   f'stroke="none">{v:g}</text>')
    for v in _ticks(fr.y_lo, fr.y_hi):
        p = float(fr.py(v))
        out.append(f'<line x1="{x0 - 5}" y1="{p:.3f}" x2="{x0}" y2="{p:.3f}"/>')
        out.append(f'<text x="{x0 - 8}" y="{p + 4:.3f}" text-anchor="end" '
                   f'stroke="none">{v:.4g}</text>')
    out.append(f'<text x="{x0 + fr.pw / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
               f'stroke="none">t</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + fr.ph / 2}" text-anchor="middle" stroke="none" '
               f'transform="rotate(-90 16 {MARGIN["top"] + fr.ph / 2})">E‖x(t)‖²</text>')
    out.append("</g>")
    label = f"{escape(title)} ({stats.paths} paths, 95% CI)"
    if fit is not None:
        label += f"; fit {fit.m_star_hat:.4g}·exp(−{fit.mu_hat:.4g} t)"
    out.append(f'<text x="{x0}" y="18" font-family="sans-serif" font-size="12">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(stats, fit, path):
    """Write the mean-square curve, its CI band and an optional fit overlay to ``path``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg_text(stats, fit))
