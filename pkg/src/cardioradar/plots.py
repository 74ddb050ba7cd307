"""Deterministic SVG plots.

Everything is written by hand with fixed number formatting, so identical
inputs always give identical bytes. Long series are reduced to per-pixel
min/max pairs before drawing.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 360
MARGIN = dict(left=70, right=20, top=34, bottom=46)
COLORS = {"line": "#1f4e9a", "alt": "#c0392b", "r": "#c0392b", "t": "#27874a",
          "p": "#8e44ad", "best": "#c0392b", "grid": "#dddddd"}


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + step * 1e-9, step)


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if 1e-3 <= abs(v) < 1e4:
        return f"{v:.4g}"
    return f"{v:.2e}"


class Figure:
    """One panel with linear axes."""

    def __init__(self, xlim, ylim, title="", xlabel="", ylabel="",
                 width=WIDTH, height=HEIGHT):
        self.w, self.h = width, height
        x0, x1 = (float(v) for v in xlim)
        y0, y1 = (float(v) for v in ylim)
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x0 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y0 + 0.5
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items = []

    def sx(self, x):
        x0, x1 = self.xlim
        span = self.w - MARGIN["left"] - MARGIN["right"]
        return MARGIN["left"] + (np.asarray(x, dtype=float) - x0) / (x1 - x0) * span

    def sy(self, y):
        y0, y1 = self.ylim
        span = self.h - MARGIN["top"] - MARGIN["bottom"]
        return self.h - MARGIN["bottom"] - (np.asarray(y, dtype=float) - y0) / (y1 - y0) * span

    def line(self, x, y, color=COLORS["line"], cls="series"):
        x, y = _decimate(np.asarray(x, float), np.asarray(y, float),
                         self.w - MARGIN["left"] - MARGIN["right"])
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(self.sx(x), self.sy(y)))
        self.items.append(f'<polyline class="{cls}" fill="none" stroke="{color}" '
                          f'stroke-width="1" points="{pts}"/>')

    def points(self, x, y, color=COLORS["line"], cls="point", r=2.5):
        for a, b in zip(self.sx(x), self.sy(y)):
            self.items.append(f'<circle class="{cls}" cx="{_f(a)}" cy="{_f(b)}" '
                              f'r="{r}" fill="{color}"/>')

    def vlines(self, xs, color, cls, dash="4,3"):
        top, bottom = MARGIN["top"], self.h - MARGIN["bottom"]
        for x in xs:
            if self.xlim[0] <= x <= self.xlim[1]:
                X = _f(float(self.sx(x)))
                self.items.append(f'<line class="{cls}" x1="{X}" y1="{top}" x2="{X}" '
                                  f'y2="{bottom}" stroke="{color}" stroke-dasharray="{dash}"/>')

    def raw(self, element: str):
        self.items.append(element)

    def _axes(self):
        out = []
        L, R = MARGIN["left"], self.w - MARGIN["right"]
        T, B = MARGIN["top"], self.h - MARGIN["bottom"]
        for v in _nice_ticks(*self.xlim):
            X = _f(float(self.sx(v)))
            out.append(f'<line x1="{X}" y1="{T}" x2="{X}" y2="{B}" stroke="{COLORS["grid"]}"/>')
            out.append(f'<text x="{X}" y="{B + 16}" text-anchor="middle">{_tick_label(v)}</text>')
        for v in _nice_ticks(*self.ylim):
            Y = _f(float(self.sy(v)))
            out.append(f'<line x1="{L}" y1="{Y}" x2="{R}" y2="{Y}" stroke="{COLORS["grid"]}"/>')
            out.append(f'<text x="{L - 6}" y="{Y}" text-anchor="end" '
                       f'dominant-baseline="middle">{_tick_label(v)}</text>')
        out.append(f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" '
                   'fill="none" stroke="#333333"/>')
        out.append(f'<text x="{(L + R) / 2:.1f}" y="{self.h - 8}" text-anchor="middle">'
                   f'{escape(self.xlabel)}</text>')
        out.append(f'<text transform="translate(16,{(T + B) / 2:.1f}) rotate(-90)" '
                   f'text-anchor="middle">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{(L + R) / 2:.1f}" y="20" text-anchor="middle" '
                   f'font-weight="bold">{escape(self.title)}</text>')
        return out

    def to_svg(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" '
                f'height="{self.h}" viewBox="0 0 {self.w} {self.h}" '
                'font-family="sans-serif" font-size="11">')
        body = ['<rect width="100%" height="100%" fill="white"/>']
        body += self._axes() + self.items
        return "\n".join([head] + body + ["</svg>"]) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_svg())


def _decimate(x, y, n_px: int):
    """Min/max pair per pixel column once the series outgrows the plot."""
    n = len(x)
    if n <= 2 * n_px:
        return x, y
    edges = np.linspace(0, n, n_px + 1).astype(int)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = y[a:b]
        i, j = a + int(np.argmin(seg)), a + int(np.argmax(seg))
        for k in sorted((i, j)):
            xs.append(x[k])
            ys.append(y[k])
    return np.array(xs), np.array(ys)


def _lim(y, pad=0.05):
    y = np.asarray(y, dtype=float)
    y = y[np.isfinite(y)]
    if y.size == 0:
        return (0.0, 1.0)
    lo, hi = float(y.min()), float(y.max())
    d = (hi - lo) * pad or 1.0
    return lo - d, hi + d


def velocity_plot(t, v, r_times=(), t_times=(), title="Velocity") -> Figure:
    """Velocity with dashed R (red) and T (green) annotation lines."""
    fig = Figure((t[0], t[-1]), _lim(v), title, "time (s)", "velocity (m/s)")
    fig.line(t, v)
    fig.vlines(r_times, COLORS["r"], "marker-r")
    fig.vlines(t_times, COLORS["t"], "marker-t")
    return fig


def displacement_plot(t, d, r_times=(), t_times=(), title="Displacement") -> Figure:
    fig = Figure((t[0], t[-1]), _lim(d), title, "time (s)", "displacement (m)")
    fig.line(t, d)
    fig.vlines(r_times, COLORS["r"], "marker-r")
    fig.vlines(t_times, COLORS["t"], "marker-t")
    return fig


def distance_curve_plot(shifts, distances, best=None,
                        title="Comb distance versus shift") -> Figure:
    fig = Figure((shifts[0], shifts[-1]), _lim(distances), title,
                 "shift applied to ECG (s)", "distance")
    fig.line(shifts, distances)
    if best is not None:
        fig.vlines([best], COLORS["best"], "marker-best", dash="2,2")
    return fig


def interval_scatter(rr, radar_iv, title="RR versus radar intervals") -> Figure:
    rr = np.asarray(rr, dtype=float)
    radar_iv = np.asarray(radar_iv, dtype=float)
    both = np.concatenate([rr, radar_iv]) if rr.size else np.array([0.0, 1.0])
    lim = _lim(both)
    fig = Figure(lim, lim, title, "RR interval (s)", "radar interval (s)")
    fig.line([lim[0], lim[1]], [lim[0], lim[1]], color=COLORS["grid"], cls="identity")
    fig.points(rr, radar_iv)
    return fig


def range_heatmap(magnitude, frame_rate: float, distances, max_cols: int = 160,
                  max_rows: int = 64, title="Range profile magnitude") -> Figure:
    """``magnitude[frame, bin]`` as a grey-scale raster (frames pooled by max)."""
    m = np.asarray(magnitude, dtype=float)
    n_frames, n_bins = m.shape
    n_rows = min(max_rows, n_bins)
    m = m[:, :n_rows]
    n_cols = min(max_cols, n_frames)
    edges = np.linspace(0, n_frames, n_cols + 1).astype(int)
    pooled = np.stack([m[a:b].max(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    top = pooled.max() or 1.0
    level = np.round(255 * (1 - pooled / top)).astype(int)
    fig = Figure((0, n_frames / frame_rate), (distances[0], distances[n_rows - 1]),
                 title, "time (s)", "distance (m)")
    L = MARGIN["left"]
    T = MARGIN["top"]
    cw = (fig.w - L - MARGIN["right"]) / n_cols
    rh = (fig.h - T - MARGIN["bottom"]) / n_rows
    for i in range(n_cols):
        for j in range(n_rows):
            g = level[i, j]
            fig.raw(f'<rect x="{_f(L + i * cw)}" y="{_f(T + (n_rows - 1 - j) * rh)}" '
                    f'width="{_f(cw + 0.05)}" height="{_f(rh + 0.05)}" '
                    f'fill="#{g:02x}{g:02x}{g:02x}"/>')
    return fig


def render_svg_plot(fig: Figure, path) -> None:
    fig.save(path)
