"""Radar event detection and the method-comparison metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _signal

from .errors import InsufficientData, InvalidArgument, UndefinedSNR
from .radar import VelocitySeries


def mad(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.median(np.abs(x - np.median(x))))


def detect_downward_peaks(v: VelocitySeries, prominence_mads: float = 3.0,
                          min_separation: float = 0.3,
                          refine: bool = True) -> np.ndarray:
    """Times of the tall negative velocity peaks.

    Minima must stand out by more than ``prominence_mads`` median absolute
    deviations and be at least ``min_separation`` s apart. With ``refine``
    each time is moved to the vertex of the parabola through the minimum
    and its two neighbours.
    """
    x = np.asarray(v.v, dtype=float)
    if x.size == 0:
        raise InvalidArgument("empty velocity series")
    dt = v.t[1] - v.t[0] if len(v.t) > 1 else 1.0
    thr = prominence_mads * mad(x)
    dist = max(1, int(round(min_separation / dt)))
    idx, props = _signal.find_peaks(-x, prominence=(thr, None), distance=dist)
    idx = idx[props["prominences"] > thr]
    t = v.t[idx].astype(float)
    if refine:
        inner = (idx > 0) & (idx < len(x) - 1)
        i = idx[inner]
        a, b, c = x[i - 1], x[i], x[i + 1]
        den = a - 2 * b + c
        shift = np.where(den != 0, 0.5 * (a - c) / np.where(den != 0, den, 1), 0.0)
        t[inner] += np.clip(shift, -0.5, 0.5) * dt
    return t


def point_distance(v1: VelocitySeries, v2: VelocitySeries) -> float:
    """Mean absolute difference over the common part of two grids.

    The grids must share the sampling step and be aligned to within a
    hundredth of a sample.
    """
    dt1, dt2 = v1.t[1] - v1.t[0], v2.t[1] - v2.t[0]
    if not np.isclose(dt1, dt2, rtol=1e-9):
        raise InvalidArgument("series have different sampling steps")
    lo, hi = max(v1.t[0], v2.t[0]), min(v1.t[-1], v2.t[-1])
    if hi < lo:
        raise InvalidArgument("series do not overlap")
    a = _crop(v1, lo, hi, dt1)
    b = _crop(v2, lo, hi, dt1)
    return float(np.mean(np.abs(a - b)))


def _crop(v, lo, hi, dt):
    i0 = (lo - v.t[0]) / dt
    if abs(i0 - round(i0)) > 0.01:
        raise InvalidArgument("series grids are not aligned")
    i0 = int(round(i0))
    n = int(round((hi - lo) / dt)) + 1
    return np.asarray(v.v[i0:i0 + n], dtype=float)


def snr_vs_clean(noisy: VelocitySeries, clean: VelocitySeries) -> float:
    """``10 log10(meansq(clean) / meansq(noisy - clean))`` in dB; ``inf``
    when the two are identical."""
    if len(noisy.v) != len(clean.v) or not np.allclose(noisy.t, clean.t):
        raise InvalidArgument("series must share the same grid")
    p_clean = np.mean(np.square(clean.v))
    if p_clean == 0:
        raise UndefinedSNR("clean series has zero power")
    p_err = np.mean(np.square(np.asarray(noisy.v) - np.asarray(clean.v)))
    if p_err == 0:
        return float("inf")
    return float(10 * np.log10(p_clean / p_err))


@dataclass
class BeatMatch:
    pairs: list                      # (ecg index, radar index)
    unmatched_ecg: list = field(default_factory=list)
    unmatched_radar: list = field(default_factory=list)


def match_beats(r_times, peak_times, offset: float = 0.0,
                window: float = 0.2) -> BeatMatch:
    """One-to-one nearest-neighbour matching of ``r_times + offset`` to
    radar peaks within ``window`` s."""
    r = np.asarray(r_times, dtype=float) + offset
    p = np.asarray(peak_times, dtype=float)
    cands = []
    for i, ri in enumerate(r):
        if p.size == 0:
            break
        j = int(np.argmin(np.abs(p - ri)))
        if abs(p[j] - ri) <= window:
            cands.append((abs(p[j] - ri), i, j))
    used_r, used_p, pairs = set(), set(), []
    for _, i, j in sorted(cands):
        if i not in used_r and j not in used_p:
            used_r.add(i)
            used_p.add(j)
            pairs.append((i, j))
    pairs.sort()
    return BeatMatch(pairs=pairs,
                     unmatched_ecg=[i for i in range(len(r)) if i not in used_r],
                     unmatched_radar=[j for j in range(len(p)) if j not in used_p])


def interval_table(r_times, peak_times, offset: float = 0.0,
                   window: float = 0.2) -> list:
    """Rows ``(r_start, rr_interval, radar_interval)`` in seconds for every
    pair of consecutive R beats whose both ends were matched."""
    r = np.asarray(r_times, dtype=float)
    p = np.asarray(peak_times, dtype=float)
    m = match_beats(r, p, offset, window)
    rows = []
    for (i0, j0), (i1, j1) in zip(m.pairs, m.pairs[1:]):
        if i1 == i0 + 1:
            rows.append((r[i0], r[i1] - r[i0], p[j1] - p[j0]))
    return rows


def rmse_intervals(r_times, peak_times, offset: float = 0.0,
                   window: float = 0.2) -> float:
    """RMSE in ms between RR intervals and radar peak-to-peak intervals."""
    rows = interval_table(r_times, peak_times, offset, window)
    if not rows:
        raise InsufficientData("fewer than 2 consecutive matched beats")
    err = np.array([a - b for _, a, b in rows])
    return float(np.sqrt(np.mean(err ** 2)) * 1e3)


@dataclass
class BenchReport:
    point_distance_mean: float
    snr_argmax_db: float
    snr_phase_db: float
    rmse_intervals_ms: float | None = None
    loss_rate: float = 0.0
    phase_spike_max: float | None = None
    clean_peak_magnitude: float | None = None
    unmatched_ecg: int = 0
    unmatched_radar: int = 0
    intervals: list = field(default_factory=list)

    @property
    def snr_gap_db(self) -> float:
        return self.snr_argmax_db - self.snr_phase_db

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            x = float(x)
            return x if np.isfinite(x) else ("inf" if x > 0 else "-inf")
        return {
            "point_distance_mean": num(self.point_distance_mean),
            "snr_argmax_db": num(self.snr_argmax_db),
            "snr_phase_db": num(self.snr_phase_db),
            "snr_gap_db": num(self.snr_gap_db),
            "rmse_intervals_ms": num(self.rmse_intervals_ms),
            "loss_rate": self.loss_rate,
            "phase_spike_max": num(self.phase_spike_max),
            "clean_peak_magnitude": num(self.clean_peak_magnitude),
            "unmatched_ecg": self.unmatched_ecg,
            "unmatched_radar": self.unmatched_radar,
            "intervals": [[float(a), float(b), float(c)] for a, b, c in self.intervals],
        }


def run_bench(cube, loss_rate: float = 0.01, seed=0, r_times=None,
              offset: float = 0.0, params=None, packet_frames: int = 1) -> BenchReport:
    """Phase route against argmax route on ``cube`` and on a copy of it
    with ``loss_rate`` of its packets zeroed.

    SNRs compare each route on the lossy copy with the same route on the
    original. With ``r_times`` (ECG clock) and ``offset`` the radar peak
    intervals are also scored against the RR intervals.
    """
    from .radar import (extract_velocity_argmax, extract_velocity_phase,
                        inject_packet_loss, range_fft, reduce_chirps,
                        select_brightest_range)
    clean_prof = range_fft(reduce_chirps(cube))
    rb = select_brightest_range(clean_prof)
    va = extract_velocity_argmax(clean_prof, rb, params)
    vp = extract_velocity_phase(clean_prof, rb, params)
    if loss_rate > 0:
        lossy = inject_packet_loss(cube, loss_rate, seed, packet_frames)
        lossy_prof = range_fft(reduce_chirps(lossy))
        va_l = extract_velocity_argmax(lossy_prof, rb, params)
        vp_l = extract_velocity_phase(lossy_prof, rb, params)
    else:
        va_l, vp_l = va, vp
    peaks = detect_downward_peaks(va)
    heights = np.abs(np.interp(peaks, va.t, va.v)) if peaks.size else np.array([np.nan])
    report = BenchReport(
        point_distance_mean=point_distance(vp, va),
        snr_argmax_db=snr_vs_clean(va_l, va),
        snr_phase_db=snr_vs_clean(vp_l, vp),
        loss_rate=float(loss_rate),
        phase_spike_max=float(np.max(np.abs(vp_l.v))),
        clean_peak_magnitude=float(np.median(heights)))
    if r_times is not None:
        m = match_beats(r_times, peaks, offset)
        report.unmatched_ecg = len(m.unmatched_ecg)
        report.unmatched_radar = len(m.unmatched_radar)
        report.intervals = interval_table(r_times, peaks, offset)
        if report.intervals:
            report.rmse_intervals_ms = rmse_intervals(r_times, peaks, offset)
    return report
