"""ECG / radar alignment.

The automated route turns both event lists into pseudo Dirac combs (sums
of Gaussian bumps) and searches the shift of the ECG comb that minimises
their L1 distance. Heart-rate irregularity is what makes the minimum
unique; on a perfectly periodic rhythm every multiple of the period fits.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ecg import EcgRecord
from .errors import AlignmentFailed, InvalidArgument, SyncFailed

DEFAULT_A = 0.1
DEFAULT_STEP = 0.004
DEFAULT_HALF_RANGE = 2.0
MIN_EVENTS = 3
# coefficient of variation of intervals below which the rhythm is periodic
PERIODIC_CV = 1e-3
TRIM_SECONDS = 1.0


class PeriodicRhythmWarning(UserWarning):
    pass


@dataclass
class PseudoComb:
    grid: np.ndarray
    values: np.ndarray
    a: float


@dataclass
class SyncResult:
    best_offset: float
    shifts: np.ndarray
    distances: np.ndarray
    method: str = "comb"
    diagnostics: dict = field(default_factory=dict)

    @property
    def distance_curve(self) -> dict:
        return dict(zip(self.shifts.tolist(), self.distances.tolist()))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "best_offset_s": float(self.best_offset),
            "curve": [[float(s), float(d)] for s, d in zip(self.shifts, self.distances)],
            "diagnostics": self.diagnostics,
        }


def comb_values(event_times, a: float, x, gaussian: bool = False) -> np.ndarray:
    """Sum over events of ``exp(-(x - T)^2 / a) / (|a| sqrt(pi))``.

    The exponent divides by ``a`` itself, not ``a**2``. With ``gaussian``
    each bump is instead the unit-area normal density of std ``|a|``.
    """
    if a == 0:
        raise InvalidArgument("comb width coefficient a must be non-zero")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if gaussian:
        norm, denom = 1.0 / (abs(a) * np.sqrt(2 * np.pi)), 2 * a * a
    else:
        norm, denom = 1.0 / (abs(a) * np.sqrt(np.pi)), a
    for T in np.asarray(event_times, dtype=float):
        out += norm * np.exp(-((x - T) ** 2) / denom)
    return out


def _support(a: float, gaussian: bool) -> float:
    # half-width beyond which a bump is below exp(-25) of its peak
    return 5.0 * (np.sqrt(2) * abs(a) if gaussian else np.sqrt(abs(a)))


def build_pseudo_comb(event_times, a: float = DEFAULT_A, grid=None,
                      gaussian: bool = False) -> PseudoComb:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise InvalidArgument("grid must be a non-empty 1-D array")
    if grid.size > 2:
        d = np.diff(grid)
        if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
            raise InvalidArgument("grid must be uniform")
    return PseudoComb(grid=grid, values=comb_values(event_times, a, grid, gaussian), a=a)


def comb_distance(c1: PseudoComb, c2: PseudoComb) -> float:
    if c1.grid.shape != c2.grid.shape or not np.array_equal(c1.grid, c2.grid):
        raise InvalidArgument("combs are sampled on different grids")
    return float(np.sum(np.abs(c1.values - c2.values)))


def _interval_cv(times) -> float:
    iv = np.diff(np.sort(np.asarray(times, dtype=float)))
    if iv.size < 2 or np.mean(iv) == 0:
        return 0.0
    return float(np.std(iv) / np.mean(iv))


def find_offset(ecg_times, radar_times, half_range: float = DEFAULT_HALF_RANGE,
                step: float = DEFAULT_STEP, a: float = DEFAULT_A,
                gaussian: bool = False) -> SyncResult:
    """Shift ``s`` (multiple of ``step`` in ``[-half_range, half_range]``)
    minimising the distance between the comb of ``ecg_times + s`` and the
    comb of ``radar_times``. Equal distances go to the smallest ``|s|``.

    Both combs are sampled on one grid of spacing ``step`` covering the
    union of the events, padded by the search range plus the bump support,
    so shifting by a whole number of steps is an exact slide along the grid.
    """
    te = np.sort(np.asarray(ecg_times, dtype=float))
    tr = np.sort(np.asarray(radar_times, dtype=float))
    if te.size < MIN_EVENTS or tr.size < MIN_EVENTS:
        raise SyncFailed(
            f"need at least {MIN_EVENTS} events per side "
            f"(ecg={te.size}, radar={tr.size})")
    if step <= 0 or half_range < 0:
        raise InvalidArgument("step must be positive and half_range >= 0")
    n_shift = int(round(half_range / step))
    support = _support(a, gaussian)
    pad = n_shift * step + support
    lo = min(te[0], tr[0]) - pad
    n_grid = int(np.ceil((max(te[-1], tr[-1]) + pad - lo) / step)) + 1
    grid = lo + np.arange(n_grid) * step

    # ECG comb on a grid extended by n_shift points each side;
    # shift k*step reads ext[n_shift - k : n_shift - k + n_grid]
    ext_grid = lo + np.arange(-n_shift, n_grid + n_shift) * step
    ext = comb_values(te, a, ext_grid, gaussian)
    radar_comb = comb_values(tr, a, grid, gaussian)
    windows = np.lib.stride_tricks.sliding_window_view(ext, n_grid)
    ks = np.arange(-n_shift, n_shift + 1)
    dist = np.abs(windows[n_shift - ks] - radar_comb).sum(axis=1)
    shifts = ks * step

    order = np.lexsort((shifts, np.abs(shifts), dist))
    best = int(order[0])

    diagnostics = {"cv_ecg": _interval_cv(te), "cv_radar": _interval_cv(tr),
                   "n_ecg": int(te.size), "n_radar": int(tr.size)}
    # other local minima nearly as deep as the global one
    interior = (dist[1:-1] < dist[:-2]) & (dist[1:-1] <= dist[2:])
    minima = np.flatnonzero(interior) + 1
    span = dist.max() - dist[best]
    rivals = [int(i) for i in minima if i != best
              and dist[i] - dist[best] <= 0.01 * span
              and abs(shifts[i] - shifts[best]) > 10 * step]
    degenerate = (min(diagnostics["cv_ecg"], diagnostics["cv_radar"]) < PERIODIC_CV
                  or bool(rivals))
    diagnostics["degenerate"] = degenerate
    diagnostics["rival_shifts"] = [float(shifts[i]) for i in rivals]
    if degenerate:
        warnings.warn("event intervals are (nearly) periodic; the offset is "
                      "ambiguous up to multiples of the beat period",
                      PeriodicRhythmWarning, stacklevel=2)
    return SyncResult(best_offset=float(shifts[best]), shifts=shifts,
                      distances=dist, method="comb", diagnostics=diagnostics)


def align_manual(r_time: float, peak_time: float) -> SyncResult:
    """Offset from one hand-picked pair: an R wave and the downward
    velocity peak taken to be its mechanical counterpart."""
    off = float(peak_time) - float(r_time)
    return SyncResult(best_offset=off, shifts=np.array([off]),
                      distances=np.array([0.0]), method="manual")


def align_by_impulse(ecg: EcgRecord, impulse_time: float | None,
                     trim: float = TRIM_SECONDS) -> EcgRecord:
    """Rebase the ECG clock on the impulse and drop the first ``trim`` s.

    Samples before the impulse are discarded; the impulse becomes time 0
    and the kept record starts at time ``trim``. The caller trims the radar
    series to ``t >= trim`` as well.
    """
    if impulse_time is None:
        raise AlignmentFailed("no synchronisation impulse found")
    i_imp = ecg.index_of(impulse_time)
    if not 0 <= i_imp < len(ecg):
        raise AlignmentFailed(
            f"impulse time {impulse_time} s outside the record")
    i0 = i_imp + int(round(trim * ecg.sample_rate))
    if i0 >= len(ecg):
        raise AlignmentFailed("record ends within the trimmed second")
    leads = {k: v[i0:].copy() for k, v in ecg.leads.items()}
    return EcgRecord(leads=leads, sample_rate=ecg.sample_rate,
                     t0=(i0 - i_imp) / ecg.sample_rate)


def trim_series(t, values, trim: float = TRIM_SECONDS):
    """Radar-side counterpart of the impulse trim: keep ``t >= trim``."""
    t = np.asarray(t)
    keep = t >= trim - 1e-12
    return t[keep], np.asarray(values)[keep]
