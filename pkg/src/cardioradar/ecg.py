"""ECG conditioning and P/R/T wave labeling on lead II."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _signal

from . import dsp
from .clustering import NOISE, dbscan
from .errors import InvalidArgument, LabelingFailed

LEADS = ("I", "II", "III", "AVR", "AVL", "AVF")

BASELINE_WINDOW = 2001
BASELINE_ORDER = 2
IMPULSE_THRESHOLD = 5e4  # mV/s, i.e. 50 mV/ms


@dataclass
class EcgRecord:
    """Multi-lead ECG in mV. ``t0`` is the time of the first sample on the
    recording's own clock."""

    leads: dict
    sample_rate: float = 2000.0
    t0: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidArgument("sample_rate must be positive")
        if not self.leads:
            raise InvalidArgument("record has no leads")
        self.leads = {k: np.asarray(v, dtype=float) for k, v in self.leads.items()}
        lengths = {len(v) for v in self.leads.values()}
        if len(lengths) != 1:
            raise InvalidArgument(f"leads differ in length: {sorted(lengths)}")

    def __len__(self):
        return len(next(iter(self.leads.values())))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def index_of(self, t: float) -> int:
        return int(round((t - self.t0) * self.sample_rate))


@dataclass(frozen=True)
class PeakFeature:
    time: float
    prominence: float
    width: float
    index: int = -1

    def to_dict(self) -> dict:
        return {"time": self.time, "prominence": self.prominence,
                "width": self.width}


@dataclass
class ClusterResult:
    peaks: list
    labels: np.ndarray
    features: np.ndarray
    degenerate: bool = False

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if np.any(self.labels >= 0) else 0

    @property
    def outliers(self) -> list:
        return [p for p, l in zip(self.peaks, self.labels) if l == NOISE]

    def members(self, label: int) -> list:
        return [p for p, l in zip(self.peaks, self.labels) if l == label]


@dataclass
class WaveAnnotations:
    p_times: list = field(default_factory=list)
    r_times: list = field(default_factory=list)
    t_times: list = field(default_factory=list)
    outliers: list = field(default_factory=list)
    impulse_time: float | None = None
    beats: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "p": [float(x) for x in self.p_times],
            "r": [float(x) for x in self.r_times],
            "t": [float(x) for x in self.t_times],
            "impulse": None if self.impulse_time is None else float(self.impulse_time),
            "outliers": [o.to_dict() for o in self.outliers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaveAnnotations":
        return cls(p_times=list(d["p"]), r_times=list(d["r"]),
                   t_times=list(d["t"]),
                   outliers=[PeakFeature(**o) for o in d.get("outliers", [])],
                   impulse_time=d.get("impulse"))


def compute_augmented_leads(I, II, III):
    """Return ``(AVR, AVL, AVF)`` from the three bipolar leads."""
    I, II, III = (np.asarray(x, dtype=float) for x in (I, II, III))
    if not (I.shape == II.shape == III.shape):
        raise InvalidArgument("bipolar leads must have equal lengths")
    avl = (I - III) / 2
    avr = -(I + II) / 2
    avf = (II + III) / 2
    return avr, avl, avf


def with_augmented(leads: dict) -> dict:
    out = {k: leads[k] for k in ("I", "II", "III")}
    out["AVR"], out["AVL"], out["AVF"] = compute_augmented_leads(
        leads["I"], leads["II"], leads["III"])
    return out


def filter_ecg(x, sample_rate: float = 2000.0,
               baseline_window: int = BASELINE_WINDOW,
               baseline_order: int = BASELINE_ORDER) -> np.ndarray:
    """High-pass 0.05 Hz, low-pass 75 Hz, band-stop 45-55 Hz, then subtract
    a cascaded moving-average baseline."""
    x = np.asarray(x, dtype=float)
    if len(x) <= baseline_window:
        raise InvalidArgument(
            f"ECG lead of {len(x)} samples is too short for the "
            f"{baseline_window}-sample baseline window")
    y = dsp.zero_phase_filter(x, "highpass", sample_rate)
    y = dsp.zero_phase_filter(y, "lowpass", sample_rate)
    y = dsp.zero_phase_filter(y, "bandstop", sample_rate)
    return y - dsp.moving_average(y, baseline_window, baseline_order)


def filter_record(ecg: EcgRecord) -> EcgRecord:
    leads = {k: filter_ecg(v, ecg.sample_rate) for k, v in ecg.leads.items()}
    return EcgRecord(leads=leads, sample_rate=ecg.sample_rate, t0=ecg.t0)


def detect_peaks(x, sample_rate: float = 2000.0, t0: float = 0.0,
                 prominence_fraction: float = 0.2,
                 max_width: float = 0.2) -> list:
    """Local maxima with prominence above ``prominence_fraction * std(x)``
    and half-prominence width below ``max_width`` seconds."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise InvalidArgument("empty signal")
    threshold = prominence_fraction * np.std(x)
    idx, props = _signal.find_peaks(x, prominence=(threshold, None), width=0,
                                    rel_height=0.5)
    out = []
    for i, prom, w in zip(idx, props["prominences"], props["widths"]):
        width = w / sample_rate
        if prom > threshold and 0 < width < max_width:
            out.append(PeakFeature(time=t0 + i / sample_rate,
                                   prominence=float(prom), width=float(width),
                                   index=int(i)))
    return out


def peak_features(peaks) -> np.ndarray:
    """``(ln(prominence / s_p), ln(width / s_w))`` with sample stds."""
    prom = np.array([p.prominence for p in peaks], dtype=float)
    width = np.array([p.width for p in peaks], dtype=float)
    sp = np.std(prom, ddof=1) if len(peaks) > 1 else 0.0
    sw = np.std(width, ddof=1) if len(peaks) > 1 else 0.0
    sp = sp if sp > 0 else 1.0
    sw = sw if sw > 0 else 1.0
    return np.column_stack([np.log(prom / sp), np.log(width / sw)])


def cluster_waves(peaks, eps: float = 0.5, min_pts: int = 4) -> ClusterResult:
    peaks = list(peaks)
    if len(peaks) < min_pts:
        warnings.warn(f"only {len(peaks)} peaks (< min_pts={min_pts}); "
                      "all treated as outliers", RuntimeWarning)
        return ClusterResult(peaks=peaks, labels=np.full(len(peaks), NOISE),
                             features=np.empty((len(peaks), 2)), degenerate=True)
    feats = peak_features(peaks)
    return ClusterResult(peaks=peaks, labels=dbscan(feats, eps, min_pts),
                         features=feats)


def label_waves(clusters: ClusterResult, p_window: float = 0.3,
                t_window: float = 0.5) -> WaveAnnotations:
    """Name clusters R (most prominent), T (widest of the rest) and P (the
    largest remaining one), then assemble beats around each R."""
    n = clusters.n_clusters
    if n < 2:
        raise LabelingFailed(
            f"need at least 2 clusters to label waves, found {n}",
            {"n_peaks": len(clusters.peaks), "n_clusters": n,
             "n_outliers": len(clusters.outliers)})
    stats = {}
    for c in range(n):
        m = clusters.members(c)
        stats[c] = (np.median([p.prominence for p in m]),
                    np.median([p.width for p in m]), len(m))
    r_lab = max(stats, key=lambda c: (stats[c][0], -c))
    rest = [c for c in stats if c != r_lab]
    t_lab = max(rest, key=lambda c: (stats[c][1], -c))
    rest = [c for c in rest if c != t_lab]
    p_lab = max(rest, key=lambda c: (stats[c][2], -c)) if rest else None

    outliers = list(clusters.outliers)
    by_label = {}
    for p, l in zip(clusters.peaks, clusters.labels):
        by_label.setdefault(int(l), []).append(p)
    for c in rest:
        if c != p_lab:
            outliers.extend(by_label[c])

    r_peaks = sorted(by_label[r_lab], key=lambda p: p.time)
    t_peaks = sorted(by_label[t_lab], key=lambda p: p.time)
    p_peaks = sorted(by_label.get(p_lab, []), key=lambda p: p.time) if p_lab is not None else []
    used_p, used_t = set(), set()
    beats = []
    r_times_all = [p.time for p in r_peaks]
    for i, r in enumerate(r_peaks):
        prev_r = r_times_all[i - 1] if i > 0 else -np.inf
        next_r = r_times_all[i + 1] if i + 1 < len(r_peaks) else np.inf
        p_sel = None
        for j in range(len(p_peaks) - 1, -1, -1):
            pt = p_peaks[j].time
            if pt < r.time and pt >= r.time - p_window and pt > prev_r and j not in used_p:
                p_sel = j
                break
        t_sel = None
        for j, tp in enumerate(t_peaks):
            if r.time < tp.time <= r.time + t_window and tp.time < next_r and j not in used_t:
                t_sel = j
                break
        if p_sel is not None:
            used_p.add(p_sel)
        if t_sel is not None:
            used_t.add(t_sel)
        beats.append((p_peaks[p_sel].time if p_sel is not None else None, r.time,
                      t_peaks[t_sel].time if t_sel is not None else None))
    outliers.extend(p for j, p in enumerate(p_peaks) if j not in used_p)
    outliers.extend(p for j, p in enumerate(t_peaks) if j not in used_t)
    outliers.sort(key=lambda p: p.time)
    return WaveAnnotations(
        p_times=[b[0] for b in beats if b[0] is not None],
        r_times=[b[1] for b in beats],
        t_times=[b[2] for b in beats if b[2] is not None],
        outliers=outliers, beats=beats)


def detect_sync_impulse(x, sample_rate: float = 2000.0, t0: float = 0.0,
                        threshold: float = IMPULSE_THRESHOLD) -> float | None:
    """Time of the first sample whose slope magnitude exceeds ``threshold``
    (mV/s), or ``None``.

    The level before the record is taken to be the record median, so a
    pulse already high at the first sample is found at ``t0``.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return None
    ext = np.concatenate([[np.median(x)], x])
    hits = np.flatnonzero(np.abs(dsp.differentiate(ext, sample_rate)) > threshold)
    if hits.size == 0:
        return None
    return t0 + max(int(hits[0]) - 1, 0) / sample_rate


def annotate(ecg: EcgRecord, lead: str = "II", eps: float = 0.5,
             min_pts: int = 4, filtered: np.ndarray | None = None) -> WaveAnnotations:
    """Filter ``lead`` and label its P, R and T waves."""
    y = filtered if filtered is not None else filter_ecg(ecg.leads[lead], ecg.sample_rate)
    peaks = detect_peaks(y, ecg.sample_rate, ecg.t0)
    return label_waves(cluster_waves(peaks, eps, min_pts))
