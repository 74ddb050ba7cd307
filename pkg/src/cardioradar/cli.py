"""Command-line entry point.

Every subcommand reads an optional TOML/JSON config, accepts ``--seed`` and
``--out-dir``, and writes a provenance record next to its outputs. A
failure prints one JSON line ``{"error": code, "message": ...}`` on stderr
and exits with status 1.

Config sections: ``[subject]``, ``[radar]``, ``[velocity]``, ``[synth]``,
``[ecg]``, ``[sync]``, ``[bench]``. Command-line flags take precedence.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io, metrics, plots, radar, sync, synth
from . import ecg as ecgmod
from .errors import CardioRadarError, InvalidArgument

# file names inside a bundle directory
IQ, ECG, TRUTH, BUNDLE = "iq.bin", "ecg.csv", "truth.json", "bundle.json"
VELOCITY, DISPLACEMENT, EVENTS = "velocity.csv", "displacement.csv", "radar_events.json"
ANNOTATIONS, FILTERED, SYNC, BENCH = "annotations.json", "ecg_filtered.csv", "sync.json", "bench.json"


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise InvalidArgument(f"config section [{name}] must be a table")
    return sec


def _pick(flag, cfg_sec: dict, key: str, default):
    if flag is not None:
        return flag
    return cfg_sec.get(key, default)


def _paths(args, name: str, attr: str) -> Path:
    given = getattr(args, attr, None)
    if given:
        return Path(given)
    if args.bundle:
        return Path(args.bundle) / name
    raise InvalidArgument(f"--{attr.replace('_', '-')} or --bundle is required")


def _out_dir(args) -> Path:
    out = Path(args.out_dir or args.bundle or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _provenance(out: Path, command: str, cfg: dict, seed, inputs=()):
    rec = io.provenance(command, cfg, seed, [p for p in inputs if p and Path(p).exists()])
    io.write_json(out / f"provenance_{command}.json", rec, "provenance")


# subcommands --------------------------------------------------------------

def cmd_synth(args, cfg):
    s = _section(cfg, "synth")
    subj = dict(_section(cfg, "subject"))
    if args.hr is not None:
        subj["heart_rate_bpm"] = args.hr
    if args.apnea:
        subj["apnea"] = True
    if args.em_delay is not None:
        subj["em_delay"] = args.em_delay
    params = synth.SubjectParams.from_dict(subj)
    config = radar.RadarConfig.from_dict(_section(cfg, "radar"))
    duration = float(_pick(args.duration, s, "duration", 30.0))
    offset = float(_pick(args.offset, s, "offset", 0.0))
    impulse_at = _pick(args.impulse_at, s, "impulse_at", None)
    loss = float(_pick(args.loss, s, "loss", 0.0))
    noise_db = float(_pick(args.noise_db, s, "noise_db", -20.0))
    cap = synth.make_capture(params, duration, config, seed=args.seed,
                             offset=offset, impulse_at=impulse_at,
                             noise_db=noise_db,
                             ecg_noise=float(s.get("ecg_noise", 0.005)),
                             loss=loss)
    cube = cap.cube
    if not args.all_chirps:
        # chirps within a frame are identical; store one per frame
        cube = radar.reduce_chirps(cube)
    out = _out_dir(args)
    io.write_iq_cube(out / IQ, cube)
    io.write_ecg_csv(out / ECG, cap.ecg)
    io.write_json(out / TRUTH, cap.truth.to_dict(), "truth")
    io.write_json(out / BUNDLE, {"iq_path": IQ, "ecg_path": ECG,
                                 "truth_path": TRUTH,
                                 "config_path": io.sidecar_path(IQ).name}, "bundle")
    _provenance(out, "synth", cfg, args.seed)
    return {"out_dir": str(out), "n_beats": int(len(cap.truth.within(
        cap.truth.heartbeat_times, 0, duration)))}


def _velocity_params(cfg) -> radar.VelocityParams:
    return radar.VelocityParams.from_dict(_section(cfg, "velocity"))


def cmd_radar(args, cfg):
    iq_path = _paths(args, IQ, "iq")
    cube = io.read_iq_cube(iq_path)
    params = _velocity_params(cfg)
    res = radar.process_capture(cube, params, args.range_bin)
    peaks = metrics.detect_downward_peaks(res.velocity)
    out = _out_dir(args)
    io.write_series_csv(out / VELOCITY, res.velocity.t, v=res.velocity.v)
    io.write_series_csv(out / DISPLACEMENT, res.displacement.t, d=res.displacement.d)
    events = {"range_bin": int(res.range_bin),
              "distance_m": float(res.profiles.distances[res.range_bin]),
              "peaks": [float(p) for p in peaks],
              "frame_rate": float(cube.config.frame_rate),
              "velocity_params": params.to_dict()}
    io.write_json(out / EVENTS, events, "radar_events")
    mag = np.abs(res.profiles.profiles).mean(axis=0)
    plots.range_heatmap(mag, cube.config.frame_rate, res.profiles.distances).save(
        out / "range_heatmap.svg")
    plots.velocity_plot(res.velocity.t, res.velocity.v).save(out / "velocity.svg")
    plots.displacement_plot(res.displacement.t, res.displacement.d).save(
        out / "displacement.svg")
    _provenance(out, "radar", cfg, args.seed, [iq_path, io.sidecar_path(iq_path)])
    return {"range_bin": events["range_bin"], "n_peaks": len(peaks)}


def cmd_ecg(args, cfg):
    s = _section(cfg, "ecg")
    ecg_path = _paths(args, ECG, "ecg")
    rec = io.read_ecg_csv(ecg_path)
    lead = args.lead or s.get("lead", "II")
    if lead not in rec.leads:
        raise InvalidArgument(f"lead {lead} not in record ({sorted(rec.leads)})")
    impulse = ecgmod.detect_sync_impulse(rec.leads["I"], rec.sample_rate, rec.t0) \
        if "I" in rec.leads else None
    clock = "ecg"
    if args.align_impulse:
        rec = sync.align_by_impulse(rec, impulse)
        clock = "impulse"
    filtered = ecgmod.filter_ecg(rec.leads[lead], rec.sample_rate)
    ann = ecgmod.annotate(rec, lead, float(s.get("eps", 0.5)),
                          int(s.get("min_pts", 4)), filtered=filtered)
    ann.impulse_time = impulse
    out = _out_dir(args)
    doc = ann.to_dict()
    doc["clock"] = clock
    doc["lead"] = lead
    io.write_json(out / ANNOTATIONS, doc, "annotations")
    io.write_series_csv(out / FILTERED, rec.times, **{lead: filtered})
    _provenance(out, "ecg", cfg, args.seed, [ecg_path])
    return {"n_r": len(ann.r_times), "n_outliers": len(ann.outliers),
            "impulse": impulse}


def cmd_sync(args, cfg):
    s = _section(cfg, "sync")
    ann_path = _paths(args, ANNOTATIONS, "annotations")
    ev_path = _paths(args, EVENTS, "radar_events")
    ann = io.read_json(ann_path, "annotations")
    events = io.read_json(ev_path, "radar_events")
    radar_t = np.asarray(events["peaks"], dtype=float)
    if ann.get("clock") == "impulse":
        radar_t = radar_t[radar_t >= sync.TRIM_SECONDS]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sync.PeriodicRhythmWarning)
        res = sync.find_offset(ann["r"], radar_t,
                               half_range=float(_pick(args.half_range, s, "half_range", sync.DEFAULT_HALF_RANGE)),
                               step=float(_pick(args.step, s, "step", sync.DEFAULT_STEP)),
                               a=float(_pick(args.a, s, "a", sync.DEFAULT_A)))
    out = _out_dir(args)
    io.write_json(out / SYNC, res.to_dict(), "sync")
    plots.distance_curve_plot(res.shifts, res.distances, res.best_offset).save(
        out / "distance_curve.svg")
    vel_path = Path(args.velocity) if args.velocity else ev_path.parent / VELOCITY
    if vel_path.exists():
        v = io.read_series_csv(vel_path)
        r = np.asarray(ann["r"]) + res.best_offset
        t = np.asarray(ann["t"]) + res.best_offset
        plots.velocity_plot(v["t"], v["v"], r, t,
                            title="Velocity with ECG R and T waves").save(
            out / "velocity_annotated.svg")
    _provenance(out, "sync", cfg, args.seed, [ann_path, ev_path])
    return {"best_offset_s": res.best_offset,
            "degenerate": res.diagnostics["degenerate"]}


def cmd_bench(args, cfg):
    s = _section(cfg, "bench")
    iq_path = _paths(args, IQ, "iq")
    cube = io.read_iq_cube(iq_path)
    loss = float(_pick(args.loss, s, "loss", 0.01))
    r_times, offset = None, 0.0
    ann_path = Path(args.annotations) if args.annotations else (
        Path(args.bundle) / ANNOTATIONS if args.bundle else None)
    sync_path = Path(args.sync) if args.sync else (
        Path(args.bundle) / SYNC if args.bundle else None)
    inputs = [iq_path]
    if ann_path and ann_path.exists() and sync_path and sync_path.exists():
        r_times = io.read_json(ann_path, "annotations")["r"]
        offset = io.read_json(sync_path, "sync")["best_offset_s"]
        inputs += [ann_path, sync_path]
    rep = metrics.run_bench(cube, loss, args.seed, r_times, offset,
                            _velocity_params(cfg))
    out = _out_dir(args)
    io.write_json(out / BENCH, rep.to_dict(), "bench")
    if rep.intervals:
        rows = np.asarray(rep.intervals)
        plots.interval_scatter(rows[:, 1], rows[:, 2]).save(out / "intervals.svg")
    _provenance(out, "bench", cfg, args.seed, inputs)
    return {"snr_gap_db": rep.to_dict()["snr_gap_db"],
            "rmse_intervals_ms": rep.rmse_intervals_ms}


def cmd_report(args, cfg):
    rows = []
    for b in args.bundles:
        b = Path(b)
        row = {"name": b.name, "true_offset_s": None, "best_offset_s": None,
               "offset_error_s": None, "bench": None}
        if (b / TRUTH).exists():
            row["true_offset_s"] = io.read_json(b / TRUTH, "truth")["operator_offset"]
        if (b / SYNC).exists():
            row["best_offset_s"] = io.read_json(b / SYNC, "sync")["best_offset_s"]
        if row["true_offset_s"] is not None and row["best_offset_s"] is not None:
            row["offset_error_s"] = row["best_offset_s"] - row["true_offset_s"]
        if (b / BENCH).exists():
            row["bench"] = io.read_json(b / BENCH, "bench")
        rows.append(row)
    errs = [abs(r["offset_error_s"]) for r in rows if r["offset_error_s"] is not None]
    rmses = [r["bench"]["rmse_intervals_ms"] for r in rows
             if r["bench"] and isinstance(r["bench"].get("rmse_intervals_ms"), (int, float))]
    summary = {"n_bundles": len(rows),
               "max_abs_offset_error_s": max(errs) if errs else None,
               "mean_rmse_intervals_ms": float(np.mean(rmses)) if rmses else None}
    out = _out_dir(args)
    io.write_json(out / "report.json", {"bundles": rows, "summary": summary}, "report")
    if errs:
        truth = [r["true_offset_s"] for r in rows if r["offset_error_s"] is not None]
        est = [r["best_offset_s"] for r in rows if r["offset_error_s"] is not None]
        plots.interval_scatter(truth, est, title="Recovered versus injected offset").save(
            out / "offsets.svg")
    _provenance(out, "report", cfg, args.seed,
                [Path(b) / SYNC for b in args.bundles])
    return summary


# parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cardioradar",
                                description="FMCW radar heartbeat analysis against ECG")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, bundle=True):
        sp.add_argument("--config", help="TOML or JSON configuration file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out-dir", help="output directory (default: the bundle)")
        if bundle:
            sp.add_argument("--bundle", help="bundle directory supplying default inputs")
        return sp

    sp = common(sub.add_parser("synth", help="generate a synthetic capture bundle"), bundle=False)
    sp.set_defaults(bundle=None)
    sp.add_argument("--duration", type=float)
    sp.add_argument("--hr", type=float, help="mean heart rate, bpm")
    sp.add_argument("--apnea", action="store_true")
    sp.add_argument("--offset", type=float, help="operator offset, s (negative: ECG first)")
    sp.add_argument("--impulse-at", type=float, help="sync impulse time on the ECG clock, s")
    sp.add_argument("--loss", type=float, help="packet loss rate")
    sp.add_argument("--noise-db", type=float, help="IQ noise relative to the return, dB")
    sp.add_argument("--em-delay", type=float, help="R apex to systole delay, s")
    sp.add_argument("--all-chirps", action="store_true",
                    help="store every chirp instead of one per frame")
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("radar", help="IQ cube to velocity and displacement"))
    sp.add_argument("--iq")
    sp.add_argument("--range-bin", type=int)
    sp.set_defaults(func=cmd_radar)

    sp = common(sub.add_parser("ecg", help="ECG CSV to P/R/T annotations"))
    sp.add_argument("--ecg")
    sp.add_argument("--lead")
    sp.add_argument("--align-impulse", action="store_true",
                    help="rebase the clock on the sync impulse and trim 1 s")
    sp.set_defaults(func=cmd_ecg)

    sp = common(sub.add_parser("sync", help="estimate the ECG/radar offset"))
    sp.add_argument("--annotations")
    sp.add_argument("--radar-events")
    sp.add_argument("--velocity")
    sp.add_argument("--a", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--half-range", type=float)
    sp.set_defaults(func=cmd_sync)

    sp = common(sub.add_parser("bench", help="phase versus argmax comparison"))
    sp.add_argument("--iq")
    sp.add_argument("--loss", type=float)
    sp.add_argument("--annotations")
    sp.add_argument("--sync")
    sp.set_defaults(func=cmd_bench)

    sp = common(sub.add_parser("report", help="aggregate bundle results"), bundle=False)
    sp.set_defaults(bundle=None)
    sp.add_argument("bundles", nargs="+")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = io.load_config(args.config)
        summary = args.func(args, cfg)
    except CardioRadarError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io_error", "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
