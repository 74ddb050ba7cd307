"""Synthetic captures with known ground truth.

Absolute time is the radar clock: the radar capture covers ``[0, duration)``.
The beat schedule extends ``margin`` seconds on both sides so an ECG can be
cut anywhere around the radar capture (operator offsets, impulse pre-roll).
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .ecg import EcgRecord, with_augmented
from .errors import InvalidArgument
from .radar import IqCube, RadarConfig

# Perpendicular target distance that falls on range bin 51 with the default
# configuration (bin spacing 9.375 mm).
DEFAULT_TARGET_DISTANCE = 0.478

# (offset s, sigma s, lead II mV, lead I mV); offsets/sigma of T scale with sqrt(RR)
ECG_WAVES = {
    "P": (-0.160, 0.020, 0.15, 0.08),
    "Q": (-0.025, 0.008, -0.10, -0.05),
    "R": (0.000, 0.010, 1.00, 0.60),
    "S": (0.025, 0.008, -0.25, -0.10),
    "T": (0.300, 0.045, 0.30, 0.18),
}
IMPULSE_MV = 3300.0
IMPULSE_WIDTH = 0.1


@dataclass(frozen=True)
class SubjectParams:
    heart_rate_bpm: float = 60.0
    hrv_fraction: float = 0.05
    # independent beat-to-beat interval scatter (fraction of the interval)
    beat_jitter: float = 0.02
    resp_rate_bpm: float = 10.0
    resp_amplitude: float = 4e-3
    beat_amplitude: float = 0.5e-3
    apnea: bool = False
    # electrical R apex precedes the mechanical systole by this much
    em_delay: float = 0.0
    fall_width: float = 0.08   # 10-90 % duration of the systolic drop
    rise_centers: tuple = (0.17, 0.32)
    rise_scale: float = 0.025

    def __post_init__(self):
        if self.heart_rate_bpm <= 0 or self.resp_rate_bpm <= 0:
            raise InvalidArgument("rates must be positive")
        if self.resp_amplitude < 0 or self.beat_amplitude < 0 or self.beat_jitter < 0:
            raise InvalidArgument("amplitudes must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rise_centers"] = list(self.rise_centers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SubjectParams":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "rise_centers" in known:
            known["rise_centers"] = tuple(known["rise_centers"])
        return cls(**known)


@dataclass
class CaptureTruth:
    heartbeat_times: np.ndarray   # mechanical systole, radar clock
    r_times: np.ndarray
    p_wave_times: np.ndarray
    t_wave_times: np.ndarray
    rr: np.ndarray                # interval following each beat
    displacement: np.ndarray      # chest position towards the radar, m
    frame_rate: float
    duration: float
    params: SubjectParams = field(default_factory=SubjectParams)
    resp_phase: float = 0.0
    operator_offset: float = 0.0
    impulse_time: float | None = None
    seed: int | None = None

    @staticmethod
    def within(times, t0, t1) -> np.ndarray:
        times = np.asarray(times)
        return times[(times >= t0) & (times < t1)]

    def to_dict(self) -> dict:
        return {
            "heartbeat_times": self.heartbeat_times.tolist(),
            "r_times": self.r_times.tolist(),
            "p_wave_times": self.p_wave_times.tolist(),
            "t_wave_times": self.t_wave_times.tolist(),
            "frame_rate": self.frame_rate,
            "duration": self.duration,
            "operator_offset": self.operator_offset,
            "impulse_time": self.impulse_time,
            "seed": self.seed,
            "subject": self.params.to_dict(),
        }


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def beat_template(tau, params: SubjectParams, rr: float = 1.0) -> np.ndarray:
    """Chest displacement (towards the radar) caused by one beat.

    A fast drop centred on the systole followed by a two-step recovery; the
    recovery timing scales with ``sqrt(rr)``.
    """
    k = np.sqrt(rr)
    s_fall = params.fall_width / (2 * np.log(9.0))
    c1, c2 = params.rise_centers
    s_rise = params.rise_scale * k
    return params.beat_amplitude * (
        -_logistic(tau / s_fall)
        + 0.5 * _logistic((tau - c1 * k) / s_rise)
        + 0.5 * _logistic((tau - c2 * k) / s_rise))


def beat_schedule(params: SubjectParams, t_start: float, t_stop: float,
                  rng: np.random.Generator, resp_phase: float) -> np.ndarray:
    hr0 = params.heart_rate_bpm / 60.0
    f_resp = params.resp_rate_bpm / 60.0

    def rate(t):
        if params.apnea:
            return hr0 * max(0.1, 1.0 - 0.1 * t / 30.0)
        return hr0 * (1.0 + params.hrv_fraction *
                      np.sin(2 * np.pi * f_resp * t + resp_phase))

    t = t_start + rng.uniform(0.05, 0.95) / hr0
    out = []
    while t < t_stop:
        out.append(t)
        step = 1.0 / rate(t)
        if params.beat_jitter > 0:
            step *= 1.0 + params.beat_jitter * float(np.clip(rng.standard_normal(), -3, 3))
        t = t + step
    return np.array(out)


def synth_displacement(params: SubjectParams, duration: float,
                       frame_rate: float = 625.0, seed=None,
                       margin: float = 3.0):
    """Chest displacement sampled at ``frame_rate`` plus the event truth."""
    if duration <= 0:
        raise InvalidArgument("duration must be positive")
    rng = np.random.default_rng(seed)
    resp_phase = float(rng.uniform(0, 2 * np.pi))
    beats = beat_schedule(params, -margin, duration + margin, rng, resp_phase)
    rr = np.diff(beats, append=beats[-1] + (beats[-1] - beats[-2]
                                            if len(beats) > 1 else 60 / params.heart_rate_bpm))
    n = int(round(duration * frame_rate))
    t = np.arange(n) / frame_rate
    d = np.zeros(n)
    if not params.apnea:
        d += params.resp_amplitude * np.sin(
            2 * np.pi * params.resp_rate_bpm / 60.0 * t + resp_phase)
    if params.beat_amplitude > 0:
        for tb, ib in zip(beats, rr):
            lo, hi = np.searchsorted(t, [tb - 1.5, tb + 2.5])
            d[lo:hi] += beat_template(t[lo:hi] - tb, params, ib)
    r_times = beats - params.em_delay
    k = np.sqrt(rr)
    truth = CaptureTruth(
        heartbeat_times=beats, r_times=r_times,
        p_wave_times=r_times + ECG_WAVES["P"][0],
        t_wave_times=r_times + ECG_WAVES["T"][0] * k,
        rr=rr, displacement=d, frame_rate=frame_rate, duration=duration,
        params=params, resp_phase=resp_phase,
        seed=seed if seed is None or isinstance(seed, int) else None)
    return d, truth


def synth_radar_iq(displacement, config: RadarConfig | None = None,
                   noise_db: float = -20.0, seed=None,
                   target_distance: float = DEFAULT_TARGET_DISTANCE,
                   lateral_offset: float = 0.0,
                   amplitude: float = 1.0) -> IqCube:
    """FMCW beat signal of a point target at ``target_distance - d(t)``.

    The fast-time phase is referenced to the middle of the chirp, so the
    range-bin phase carries only the carrier term ``-4 pi R / lambda``.
    All chirps of a frame are identical (a read-only broadcast view).
    ``noise_db`` is the noise power relative to the target return;
    ``-inf`` gives a noiseless cube.
    """
    config = config or RadarConfig()
    d = np.asarray(displacement, dtype=float)
    lam = config.wavelength
    z = target_distance - d                                   # [frame]
    x_rx = config.rx_positions()                              # [rx]
    R = np.hypot(lateral_offset - x_rx[:, None], z[None, :])  # [rx, frame]
    f_b = R / config.distance_per_hz
    k = np.arange(config.samples_per_chirp) - (config.samples_per_chirp - 1) / 2
    phase = (2 * np.pi * f_b[:, :, None] * k / config.adc_rate
             - 4 * np.pi * R[:, :, None] / lam)
    x = amplitude * np.exp(1j * phase)
    if np.isfinite(noise_db):
        rng = np.random.default_rng(seed)
        sigma = amplitude * np.sqrt(10 ** (noise_db / 10) / 2)
        x = x + sigma * (rng.standard_normal(x.shape)
                         + 1j * rng.standard_normal(x.shape))
    base = x.astype(np.complex64)[:, :, None, :]
    shape = (config.n_rx, len(d), config.chirps_per_frame, config.samples_per_chirp)
    return IqCube(data=np.broadcast_to(base, shape), config=config)


def _wave_sum(t, r_times, rr, column, p_scale=1.0, amplitude_scale=1.0):
    y = np.zeros_like(t)
    for r, ib in zip(r_times, rr):
        lo, hi = np.searchsorted(t, [r - 0.6, r + 0.9])
        if lo == hi:
            continue
        tt = t[lo:hi] - r
        k = np.sqrt(ib)
        for name, (off, sig, *amps) in ECG_WAVES.items():
            a = amps[column] * amplitude_scale
            if name == "P":
                a *= p_scale
            if name == "T":
                off, sig = off * k, sig * k
            y[lo:hi] += a * np.exp(-0.5 * ((tt - off) / sig) ** 2)
    return y


def synth_ecg(truth: CaptureTruth, sample_rate: float = 2000.0,
              noise: float = 0.005, seed=None, start: float | None = None,
              duration: float | None = None, p_scale: float = 1.0,
              amplitude_scale: float = 1.0, powerline_mv: float = 0.0,
              wander_mv: float = 0.0) -> EcgRecord:
    """Six-lead ECG on the radar clock (``t0 = start``).

    Lead II and lead I are sums of Gaussian P, Q, R, S, T waves with R
    apexes on ``truth.r_times``; lead III is ``II - I`` exactly. White noise
    (std ``noise`` mV), 50 Hz interference and 0.2 Hz wander are optional
    additions to I and II.
    """
    if start is None:
        start = float(truth.heartbeat_times[0]) - 0.5
    if duration is None:
        duration = float(truth.heartbeat_times[-1]) + 0.5 - start
    n = int(round(duration * sample_rate))
    t = start + np.arange(n) / sample_rate
    lead2 = _wave_sum(t, truth.r_times, truth.rr, 0, p_scale, amplitude_scale)
    lead1 = _wave_sum(t, truth.r_times, truth.rr, 1, p_scale, amplitude_scale)
    rng = np.random.default_rng(seed)
    for lead in (lead1, lead2):
        if noise > 0:
            lead += noise * rng.standard_normal(n)
        if powerline_mv:
            lead += powerline_mv * np.sin(2 * np.pi * 50.0 * t)
        if wander_mv:
            lead += wander_mv * np.sin(2 * np.pi * 0.2 * t)
    leads = with_augmented({"I": lead1, "II": lead2, "III": lead2 - lead1})
    return EcgRecord(leads=leads, sample_rate=sample_rate, t0=start)


def inject_impulse(ecg: EcgRecord, at: float, amplitude_mv: float = IMPULSE_MV,
                   width: float = IMPULSE_WIDTH) -> EcgRecord:
    """Add a rectangular pulse to leads I and II (right-arm electrode)."""
    end = ecg.t0 + ecg.duration
    if at < ecg.t0 or at + width > end + 1e-12:
        raise InvalidArgument(
            f"impulse [{at}, {at + width}] s outside record [{ecg.t0}, {end}] s")
    i0 = ecg.index_of(at)
    i1 = min(len(ecg), ecg.index_of(at + width))
    leads = {k: ecg.leads[k].copy() for k in ("I", "II", "III")}
    leads["I"][i0:i1] += amplitude_mv
    leads["II"][i0:i1] += amplitude_mv
    return EcgRecord(leads=with_augmented(leads), sample_rate=ecg.sample_rate,
                     t0=ecg.t0)


def apply_operator_offset(ecg: EcgRecord, radar, offset: float,
                          truth: CaptureTruth | None = None,
                          ecg_duration: float | None = None):
    """Re-express the ECG on its own clock, started ``-offset`` s before
    the radar (``offset < 0``: ECG launched first).

    An event at radar time ``T`` appears at ECG time ``T - offset``. The
    returned ECG starts at its time 0 and lasts ``ecg_duration`` (default:
    the radar duration). Returns ``(ecg, radar, truth)``.
    """
    if ecg_duration is None:
        ecg_duration = truth.duration if truth is not None else ecg.duration
    i0 = ecg.index_of(offset)
    n = int(round(ecg_duration * ecg.sample_rate))
    if i0 < 0 or i0 + n > len(ecg):
        raise InvalidArgument(
            f"offset {offset} s with duration {ecg_duration} s exceeds the "
            "synthesized ECG span")
    leads = {k: v[i0:i0 + n].copy() for k, v in ecg.leads.items()}
    shifted = EcgRecord(leads=leads, sample_rate=ecg.sample_rate, t0=0.0)
    if truth is not None:
        truth.operator_offset = float(offset)
    return shifted, radar, truth


@dataclass
class Capture:
    """One synthetic session: radar cube, ECG on its own clock, truth."""

    cube: IqCube
    ecg: EcgRecord
    truth: CaptureTruth


def make_capture(params: SubjectParams | None = None, duration: float = 30.0,
                 config: RadarConfig | None = None, seed: int = 0,
                 offset: float = 0.0, impulse_at: float | None = None,
                 ecg_duration: float | None = None, noise_db: float = -20.0,
                 ecg_noise: float = 0.005, loss: float = 0.0) -> Capture:
    """Convenience chain used by the CLI and the benchmarks.

    Seeds for the displacement, radar noise, ECG noise and packet loss are
    derived from ``seed`` so every component is reproducible.
    """
    from .radar import inject_packet_loss

    params = params or SubjectParams()
    config = config or RadarConfig()
    ss = np.random.SeedSequence(seed)
    s_disp, s_iq, s_ecg, s_loss = (int(c.generate_state(1)[0]) for c in ss.spawn(4))
    if impulse_at is not None and ecg_duration is None:
        ecg_duration = duration + max(0.0, -offset)
    margin = 3.0 + max(abs(offset), ecg_duration - duration if ecg_duration else 0.0)
    d, truth = synth_displacement(params, duration, config.frame_rate, s_disp,
                                  margin=margin)
    truth.seed = seed
    cube = synth_radar_iq(d, config, noise_db, s_iq)
    if loss > 0:
        cube = inject_packet_loss(cube, loss, s_loss)
    ecg = synth_ecg(truth, noise=ecg_noise, seed=s_ecg)
    ecg, cube, truth = apply_operator_offset(ecg, cube, offset, truth,
                                             ecg_duration=ecg_duration)
    if impulse_at is not None:
        ecg = inject_impulse(ecg, impulse_at)
        truth.impulse_time = float(impulse_at)
    return Capture(cube=cube, ecg=ecg, truth=truth)
