"""FMCW capture -> chest velocity / displacement.

Two routes from the range profiles to a velocity time-series are provided:

* the *argmax* route: per-antenna STFT of the slow-time signal at the
  selected range bin, antenna power summed, strongest Doppler bin per time
  step converted to velocity, then smoothed and detrended;
* the *phase* route: unwrapped phase of one antenna, scaled to meters and
  differentiated. Kept as the comparison baseline.

Velocities are positive towards the radar, so the ventricular contraction
(chest moving away) shows as a negative peak.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.fft

from . import dsp
from .errors import InvalidArgument, NoTargetError

SPEED_OF_LIGHT = 3e8


@dataclass(frozen=True)
class RadarConfig:
    f_center: float = 79e9
    bandwidth: float = 4e9
    slope: float = 100e12
    frame_rate: float = 625.0
    chirps_per_frame: int = 16
    samples_per_chirp: int = 64
    n_rx: int = 4
    rx_spacing: float = 1.0  # in units of wavelength / 2
    range_fft_size: int = 256

    def __post_init__(self):
        for name in ("chirps_per_frame", "samples_per_chirp", "n_rx",
                     "range_fft_size"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        for name in ("f_center", "bandwidth", "slope", "frame_rate"):
            if getattr(self, name) <= 0:
                raise InvalidArgument(f"{name} must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_center

    @property
    def ramp_time(self) -> float:
        return self.bandwidth / self.slope

    @property
    def adc_rate(self) -> float:
        return self.samples_per_chirp / self.ramp_time

    @property
    def range_resolution(self) -> float:
        return SPEED_OF_LIGHT / (2 * self.bandwidth)

    @property
    def distance_per_hz(self) -> float:
        """Meters of target range per Hz of beat frequency."""
        return SPEED_OF_LIGHT * self.ramp_time / (2 * self.bandwidth)

    @property
    def temporal_resolution(self) -> float:
        return 1.0 / self.frame_rate

    def velocity_resolution(self, n_bins: int = 8192) -> float:
        return self.frame_rate / n_bins * self.wavelength / 2

    @property
    def max_velocity(self) -> float:
        return self.frame_rate / 2 * self.wavelength / 2

    def bin_distances(self, fft_size: int | None = None) -> np.ndarray:
        n = fft_size or self.range_fft_size
        return np.arange(n) * self.adc_rate / n * self.distance_per_hz

    def rx_positions(self) -> np.ndarray:
        """Antenna x-coordinates in meters, centred on the array midpoint."""
        step = self.rx_spacing * self.wavelength / 2
        return (np.arange(self.n_rx) - (self.n_rx - 1) / 2) * step

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RadarConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True)
class VelocityParams:
    """Argmax-route settings. Windows are counted in frames."""

    stft_window: int = 65
    stft_bins: int = 8192
    smooth_window: int = 31
    trend_window: int = 1251
    chunk: int = 16

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VelocityParams":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class IqCube:
    """Complex samples indexed ``[rx, frame, chirp, sample]``.

    ``loss_mask[rx, frame]`` marks packets that were zero-filled.
    """

    data: np.ndarray
    config: RadarConfig
    loss_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.data.ndim != 4:
            raise InvalidArgument("IQ data must be 4-D [rx, frame, chirp, sample]")
        n_rx, _, n_chirp, n_samp = self.data.shape
        c = self.config
        if n_rx != c.n_rx or n_samp != c.samples_per_chirp:
            raise InvalidArgument(
                f"data shape {self.data.shape} does not match config "
                f"(n_rx={c.n_rx}, samples_per_chirp={c.samples_per_chirp})")
        if n_chirp not in (1, c.chirps_per_frame):
            raise InvalidArgument(
                f"chirp dimension {n_chirp} does not match config "
                f"({c.chirps_per_frame})")
        if self.loss_mask is not None and self.loss_mask.shape != self.data.shape[:2]:
            raise InvalidArgument("loss_mask must have shape [rx, frame]")

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]


@dataclass
class RangeProfileSeries:
    profiles: np.ndarray  # [rx, frame, range bin]
    config: RadarConfig

    @property
    def distances(self) -> np.ndarray:
        return self.config.bin_distances(self.profiles.shape[2])

    @property
    def frame_rate(self) -> float:
        return self.config.frame_rate


@dataclass
class VelocitySeries:
    t: np.ndarray
    v: np.ndarray

    @property
    def sample_rate(self) -> float:
        return 1.0 / (self.t[1] - self.t[0])


@dataclass
class DisplacementSeries:
    t: np.ndarray
    d: np.ndarray


@dataclass
class RadarResult:
    range_bin: int
    profiles: RangeProfileSeries
    velocity: VelocitySeries
    displacement: DisplacementSeries
    params: VelocityParams = field(default_factory=VelocityParams)


def reduce_chirps(cube: IqCube) -> IqCube:
    """Keep only the first chirp of every frame."""
    return IqCube(data=cube.data[:, :, :1, :], config=cube.config,
                  loss_mask=cube.loss_mask)


def range_fft(cube: IqCube, fft_size: int | None = None) -> RangeProfileSeries:
    fft_size = fft_size or cube.config.range_fft_size
    n_samp = cube.config.samples_per_chirp
    if fft_size < n_samp:
        raise InvalidArgument(
            f"fft_size {fft_size} smaller than samples_per_chirp {n_samp}")
    if cube.data.shape[2] != 1:
        raise InvalidArgument("range_fft expects a chirp-reduced cube")
    x = cube.data[:, :, 0, :]
    profiles = scipy.fft.fft(x, n=fft_size, axis=-1)
    return RangeProfileSeries(profiles=profiles, config=cube.config)


def select_brightest_range(profiles: RangeProfileSeries) -> int:
    """Range bin with the largest time-averaged modulus (antenna mean)."""
    mean_mod = np.abs(profiles.profiles).mean(axis=(0, 1))
    if not np.any(mean_mod > 0):
        raise NoTargetError("range profiles are identically zero; no target")
    return int(np.argmax(mean_mod))


def _split_length(window: int, n_bins: int) -> int:
    """Sub-transform length for the decimated DFT, or ``n_bins`` if none fits."""
    q = 512
    while q < window:
        q *= 2
    return q if q < n_bins and n_bins % q == 0 else n_bins


def _argmax_bins(slow: np.ndarray, window: int, n_bins: int,
                 chunk: int = 16) -> np.ndarray:
    """Centred index of the strongest Doppler bin for each STFT step.

    ``slow`` is ``[rx, frame]``. Power is summed over antennas. Equal
    maxima resolve to the bin of smallest |frequency|, negative first.

    Only ``window`` samples are non-zero, so the ``n_bins``-point DFT is
    split into ``R`` modulated transforms of length ``Q = n_bins / R``:
    bin ``R*q + r`` is entry ``q`` of the transform for offset ``r``.
    """
    n_rx, n = slow.shape
    n_steps = n - window + 1
    Q = _split_length(window, n_bins)
    R = n_bins // Q
    w = dsp.hann_window(window)
    # window folded into the per-offset modulation
    mod = (np.exp(-2j * np.pi * np.outer(np.arange(R), np.arange(window)) / n_bins)
           * w).astype(np.complex64)
    windows = np.lib.stride_tricks.sliding_window_view(
        slow.astype(np.complex64), window, axis=1)
    buf = np.zeros((n_rx, chunk, R, Q), dtype=np.complex64)
    out = np.empty(n_steps, dtype=np.int64)
    half = n_bins // 2
    for start in range(0, n_steps, chunk):
        stop = min(start + chunk, n_steps)
        m = stop - start
        np.multiply(windows[:, start:stop, None, :], mod, out=buf[:, :m, :, :window])
        X = scipy.fft.fft(buf[:, :m], axis=-1)
        p = np.abs(X[0]) ** 2
        for a in range(1, n_rx):
            p += np.abs(X[a]) ** 2
        p = p.reshape(m, n_bins)
        f = np.argmax(p, axis=1)
        pmax = p[np.arange(m), f]
        k = R * (f % Q) + f // Q
        ties = np.count_nonzero(p == pmax[:, None], axis=1) > 1
        for row in np.flatnonzero(ties):
            cand = np.flatnonzero(p[row] == pmax[row])
            cand = R * (cand % Q) + cand // Q
            signed = np.where(cand < half, cand, cand - n_bins)
            k[row] = cand[np.lexsort((signed, np.abs(signed)))[0]]
        signed = np.where(k < half, k, k - n_bins)
        out[start:stop] = signed + half
    return out


def _detrend(v: np.ndarray, params: VelocityParams,
             smooth: bool = True) -> np.ndarray:
    if smooth:
        v = dsp.moving_average(v, params.smooth_window)
    return v - dsp.moving_average(v, params.trend_window)


def extract_velocity_argmax(profiles: RangeProfileSeries, range_bin: int,
                            params: VelocityParams | None = None,
                            antennas=None) -> VelocitySeries:
    """Strongest-Doppler velocity track at ``range_bin``.

    The small moving average is applied first, then the large-window trend
    is subtracted. Time stamps are window centres.
    """
    params = params or VelocityParams()
    P = profiles.profiles
    if not 0 <= range_bin < P.shape[2]:
        raise InvalidArgument(f"range_bin {range_bin} out of range")
    slow = P[:, :, range_bin]
    if antennas is not None:
        slow = slow[list(antennas)]
    n = slow.shape[1]
    if n < params.stft_window:
        raise InvalidArgument(
            f"slow-time series ({n} frames) shorter than STFT window "
            f"({params.stft_window})")
    cfg = profiles.config
    bins = _argmax_bins(slow, params.stft_window, params.stft_bins, params.chunk)
    bin_hz = cfg.frame_rate / params.stft_bins
    v_raw = (bins - params.stft_bins // 2) * bin_hz * cfg.wavelength / 2
    t = ((params.stft_window - 1) / 2 + np.arange(len(bins))) / cfg.frame_rate
    return VelocitySeries(t=t, v=_detrend(v_raw, params))


def extract_displacement_phase(profiles: RangeProfileSeries, range_bin: int,
                               rx: int = 0) -> DisplacementSeries:
    """Unwrapped phase at ``range_bin`` of one antenna, in meters."""
    P = profiles.profiles
    if not 0 <= range_bin < P.shape[2]:
        raise InvalidArgument(f"range_bin {range_bin} out of range")
    phase = np.unwrap(np.angle(P[rx, :, range_bin].astype(np.complex128)))
    d = phase * profiles.config.wavelength / (4 * np.pi)
    t = np.arange(len(d)) / profiles.config.frame_rate
    return DisplacementSeries(t=t, d=d - d[0])


def extract_velocity_phase(profiles: RangeProfileSeries, range_bin: int,
                           params: VelocityParams | None = None,
                           rx: int = 0) -> VelocitySeries:
    """Phase-route velocity; only the large-window trend is removed."""
    params = params or VelocityParams()
    disp = extract_displacement_phase(profiles, range_bin, rx)
    v = dsp.differentiate(disp.d, profiles.config.frame_rate)
    return VelocitySeries(t=disp.t, v=_detrend(v, params, smooth=False))


def velocity_to_displacement(v: VelocitySeries) -> DisplacementSeries:
    return DisplacementSeries(t=v.t.copy(), d=dsp.integrate(v.v, v.sample_rate))


def process_capture(cube: IqCube, params: VelocityParams | None = None,
                    range_bin: int | None = None) -> RadarResult:
    """Full argmax route: chirp reduction, range FFT, range selection,
    velocity and displacement."""
    params = params or VelocityParams()
    profiles = range_fft(reduce_chirps(cube))
    if range_bin is None:
        range_bin = select_brightest_range(profiles)
    vel = extract_velocity_argmax(profiles, range_bin, params)
    return RadarResult(range_bin=range_bin, profiles=profiles, velocity=vel,
                       displacement=velocity_to_displacement(vel), params=params)


def antenna_phase_difference(target_distance: float, pair_spacing: float,
                             lateral_offset: float = 0.0,
                             wavelength: float = SPEED_OF_LIGHT / 79e9) -> float:
    """Phase lead (rad) of the far antenna over the near one.

    The antennas sit at ``x = -pair_spacing/2`` and ``x = +pair_spacing/2``;
    the target is at perpendicular distance ``target_distance`` from the
    array and lateral position ``x = lateral_offset``.
    """
    if target_distance <= 0:
        raise InvalidArgument("target_distance must be positive")
    h, z = lateral_offset, target_distance
    r1 = np.hypot(h + pair_spacing / 2, z)
    r2 = np.hypot(h - pair_spacing / 2, z)
    return 2 * np.pi / wavelength * (r1 - r2)


def inject_packet_loss(cube: IqCube, loss_rate: float, seed=None,
                       packet_frames: int = 1) -> IqCube:
    """Zero a random ``loss_rate`` fraction of packets.

    A packet is ``packet_frames`` consecutive frames (all chirps, all
    samples) of one antenna.
    """
    if not 0.0 <= loss_rate <= 1.0:
        raise InvalidArgument("loss_rate must be in [0, 1]")
    if packet_frames < 1:
        raise InvalidArgument("packet_frames must be >= 1")
    n_rx, n_frames = cube.data.shape[:2]
    per_rx = -(-n_frames // packet_frames)
    n_packets = n_rx * per_rx
    n_lost = int(np.floor(loss_rate * n_packets + 0.5))
    rng = np.random.default_rng(seed)
    lost = rng.choice(n_packets, size=n_lost, replace=False)
    mask = np.zeros((n_rx, n_frames), dtype=bool)
    for p in np.sort(lost):
        rx, blk = divmod(int(p), per_rx)
        mask[rx, blk * packet_frames:(blk + 1) * packet_frames] = True
    if cube.loss_mask is not None:
        mask |= cube.loss_mask

    broadcast = cube.data.shape[2] > 1 and cube.data.strides[2] == 0
    base = cube.data[:, :, :1, :] if broadcast else cube.data
    data = np.array(base, copy=True)
    data[mask] = 0
    if broadcast:
        data = np.broadcast_to(data, cube.data.shape)
    return IqCube(data=data, config=cube.config, loss_mask=mask)
