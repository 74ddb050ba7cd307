"""File formats: binary IQ cubes, ECG and series CSV, schema-checked JSON.

IQ cube
    ``<name>.bin`` holds little-endian float32 pairs (I then Q) in
    ``[rx][frame][chirp][sample]`` order. The sidecar ``<name>.json`` carries
    the radar configuration, the number of frames and chirps stored per
    frame, and the list of lost ``[rx, frame]`` packets. Lost packets are
    zero in the file and forced to zero again on reading.
"""
from __future__ import annotations

import hashlib
import json
import platform
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .ecg import LEADS, EcgRecord
from .errors import FormatError, InvalidArgument
from .radar import IqCube, RadarConfig

IQ_FORMAT = "cardioradar-iq/1"
CSV_FMT = "%.9e"


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_iq_cube(path, cube: IqCube) -> None:
    path = Path(path)
    data = np.ascontiguousarray(cube.data, dtype=np.complex64)
    if cube.loss_mask is not None and cube.loss_mask.any():
        data = data.copy()
        data[cube.loss_mask] = 0
    raw = data.view(np.float32).astype("<f4", copy=False)
    path.write_bytes(raw.tobytes())
    lost = [] if cube.loss_mask is None else np.argwhere(cube.loss_mask).tolist()
    meta = {"format": IQ_FORMAT, "config": cube.config.to_dict(),
            "n_frames": int(data.shape[1]), "n_chirps": int(data.shape[2]),
            "lost_packets": lost}
    write_json(sidecar_path(path), meta, "iq")


def read_iq_cube(path, config: RadarConfig | None = None,
                 n_frames: int | None = None, n_chirps: int | None = None,
                 lost_packets=None) -> IqCube:
    """Load a cube; arguments left as ``None`` are taken from the sidecar."""
    path = Path(path)
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    if config is None:
        if "config" not in meta:
            raise FormatError(f"{path}: no radar configuration given or found")
        config = RadarConfig.from_dict(meta["config"])
    n_chirps = n_chirps or meta.get("n_chirps", config.chirps_per_frame)
    per_frame = config.n_rx * n_chirps * config.samples_per_chirp * 8
    size = path.stat().st_size
    if n_frames is None:
        n_frames = meta.get("n_frames", size // per_frame)
    expected = per_frame * n_frames
    if size != expected:
        gap = (f"short by {expected - size}" if size < expected
               else f"{size - expected} extra")
        raise FormatError(
            f"{path}: expected {expected} bytes for {n_frames} frames, "
            f"found {size} ({gap} bytes)")
    raw = np.fromfile(path, dtype="<f4").astype(np.float32, copy=False)
    data = raw.view(np.complex64).reshape(
        config.n_rx, n_frames, n_chirps, config.samples_per_chirp)
    if lost_packets is None:
        lost_packets = meta.get("lost_packets", [])
    mask = None
    if len(lost_packets):
        mask = np.zeros((config.n_rx, n_frames), dtype=bool)
        idx = np.asarray(lost_packets, dtype=int).reshape(-1, 2)
        if (idx < 0).any() or (idx[:, 0] >= config.n_rx).any() or (idx[:, 1] >= n_frames).any():
            raise FormatError(f"{side}: lost packet index out of range")
        mask[idx[:, 0], idx[:, 1]] = True
        data[mask] = 0
    return IqCube(data=data, config=config, loss_mask=mask)


def write_ecg_csv(path, ecg: EcgRecord) -> None:
    names = [k for k in LEADS if k in ecg.leads] + [k for k in ecg.leads if k not in LEADS]
    cols = [ecg.times] + [ecg.leads[k] for k in names]
    np.savetxt(path, np.column_stack(cols), fmt=CSV_FMT, delimiter=",",
               header=",".join(["t"] + names), comments="")


def read_ecg_csv(path) -> EcgRecord:
    cols = read_series_csv(path)
    t = cols.pop("t", None)
    if t is None or len(t) < 2:
        raise FormatError(f"{path}: ECG CSV needs a 't' column and >= 2 rows")
    fs = (len(t) - 1) / (t[-1] - t[0])
    fs = float(np.round(fs, 6))
    return EcgRecord(leads=cols, sample_rate=fs, t0=float(t[0]))


def write_series_csv(path, t, **columns) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(t, dtype=float)]
                           + [np.asarray(columns[k], dtype=float) for k in names])
    np.savetxt(path, data, fmt=CSV_FMT, delimiter=",",
               header=",".join(["t"] + names), comments="")


def read_series_csv(path) -> dict:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.shape[1] != len(header):
        raise FormatError(f"{path}: {len(header)} header names, {data.shape[1]} columns")
    return {name: data[:, i].copy() for i, name in enumerate(header)}


# JSON ---------------------------------------------------------------------

def load_schema(name: str) -> dict:
    text = resources.files("cardioradar").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def validate(obj, schema: str) -> None:
    import jsonschema
    try:
        jsonschema.validate(obj, load_schema(schema))
    except jsonschema.ValidationError as exc:
        raise FormatError(f"{schema} document invalid: {exc.message}") from exc


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj, schema: str | None = None) -> None:
    if schema is not None:
        validate(obj, schema)
    Path(path).write_text(dumps(obj))


def read_json(path, schema: str | None = None):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if schema is not None:
        validate(obj, schema)
    return obj


def load_config(path) -> dict:
    """TOML or JSON, chosen by extension."""
    if path is None:
        return {}
    path = Path(path)
    if path.suffix.lower() == ".toml":
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        with path.open("rb") as fh:
            return tomllib.load(fh)
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text())
    raise InvalidArgument(f"unsupported config format: {path.suffix}")


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def provenance(command: str, config: dict, seed, inputs=None) -> dict:
    """Config hash, seed, tool versions and input digests. No wall-clock
    time, so identical runs give identical records."""
    import scipy
    return {
        "command": command,
        "config_sha256": config_hash(config),
        "seed": seed,
        "inputs": {str(Path(p).name): file_sha256(p) for p in (inputs or [])},
        "versions": {"cardioradar": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
