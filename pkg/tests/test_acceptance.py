"""End-to-end acceptance checks on synthetic captures.

Each test prints one ``criterion N: PASS|FAIL`` line (repeated in the
terminal summary) before asserting, so a failing run still reports every
measured value.
"""
import filecmp
import time
import warnings

import numpy as np
import pytest

from cardioradar import cli, dsp, ecg, metrics, radar, sync, synth

from conftest import record_criterion

pytestmark = pytest.mark.slow


def _radar_peaks(cube):
    return metrics.detect_downward_peaks(radar.process_capture(cube).velocity)


def test_criterion_1_resolution_constants():
    t0 = time.perf_counter()
    cfg = radar.RadarConfig()
    rng_res = cfg.range_resolution
    vel_res = cfg.velocity_resolution(8192)
    t_res = cfg.temporal_resolution
    elapsed = time.perf_counter() - t0
    ok = (abs(rng_res - 3.75e-2) <= 1e-12
          # the quoted 1.45e-4 carries three significant figures
          and abs(vel_res - 1.45e-4) <= 0.005e-4
          and abs(t_res - 1.6e-3) <= 1e-15
          and elapsed < 1.0)
    record_criterion(1, ok, f"range {rng_res:.6g} m, velocity {vel_res:.6g} m/s, "
                            f"time {t_res:.6g} s, {elapsed * 1e3:.2f} ms")
    assert ok


def test_criterion_2_offset_recovery():
    rng = np.random.default_rng(2024)
    offsets = rng.uniform(-2.0, 2.0, size=20)
    t0 = time.perf_counter()
    errors = []
    for seed, off in enumerate(offsets):
        cap = synth.make_capture(duration=30.0, seed=100 + seed, offset=float(off))
        ann = ecg.annotate(cap.ecg)
        res = sync.find_offset(ann.r_times, _radar_peaks(cap.cube))
        errors.append(res.best_offset - off)
    elapsed = time.perf_counter() - t0
    worst = float(np.max(np.abs(errors)))
    ok = worst <= 0.004 + 1e-9 and elapsed < 120.0
    record_criterion(2, ok, f"worst offset error {worst * 1e3:.2f} ms over 20 bundles, "
                            f"runtime {elapsed:.1f} s")
    assert ok


def test_criterion_3_packet_loss():
    cap = synth.make_capture(duration=30.0, seed=3)
    rep = metrics.run_bench(cap.cube, loss_rate=0.01, seed=3)
    ratio = rep.phase_spike_max / rep.clean_peak_magnitude
    ok = rep.snr_gap_db >= 30.0 and ratio >= 20.0
    record_criterion(3, ok, f"SNR argmax {rep.snr_argmax_db:.2f} dB, phase "
                            f"{rep.snr_phase_db:.2f} dB, gap {rep.snr_gap_db:.2f} dB; "
                            f"spike {rep.phase_spike_max:.3f} m/s = {ratio:.1f}x clean peak")
    assert ok


def test_criterion_4_interval_rmse():
    rmses, missed, spurious = [], 0, 0
    for seed in range(12):
        cap = synth.make_capture(duration=20.0, seed=400 + seed)
        res = radar.process_capture(cap.cube)
        peaks = metrics.detect_downward_peaks(res.velocity)
        r = np.asarray(ecg.annotate(cap.ecg).r_times)
        # ECG clock equals radar clock here (no operator offset)
        lo, hi = res.velocity.t[0] + 0.25, res.velocity.t[-1] - 0.25
        r = r[(r >= lo) & (r <= hi)]
        m = metrics.match_beats(r, peaks)
        missed += len(m.unmatched_ecg)
        spurious += sum(1 for j in m.unmatched_radar if lo <= peaks[j] <= hi)
        rmses.append(metrics.rmse_intervals(r, peaks))
    worst = max(rmses)
    ok = worst < 2.0 and missed == 0
    record_criterion(4, ok, f"worst RMSE {worst:.3f} ms (mean {np.mean(rmses):.3f}) over 12 "
                            f"captures, missed {missed}, spurious {spurious}")
    assert ok


def test_criterion_5_method_agreement():
    cap = synth.make_capture(duration=20.0, seed=5, noise_db=-40.0)
    prof = radar.range_fft(radar.reduce_chirps(cap.cube))
    rb = radar.select_brightest_range(prof)
    dist = metrics.point_distance(radar.extract_velocity_phase(prof, rb),
                                  radar.extract_velocity_argmax(prof, rb))
    ok = dist <= 5e-4
    record_criterion(5, ok, f"mean point distance {dist:.3e} m/s (clean capture, -40 dB)")
    assert ok


def test_criterion_6_impulse_alignment():
    params = synth.SubjectParams(em_delay=0.048)
    cap = synth.make_capture(params, duration=30.0, seed=6, offset=-1.0, impulse_at=1.0)
    imp = ecg.detect_sync_impulse(cap.ecg.leads["I"], cap.ecg.sample_rate, cap.ecg.t0)
    aligned = sync.align_by_impulse(cap.ecg, imp)
    ann = ecg.annotate(aligned)
    peaks = _radar_peaks(cap.cube)
    _, peaks = sync.trim_series(peaks, peaks)
    res = sync.find_offset(ann.r_times, peaks)
    ok = abs(res.best_offset - 0.048) <= 0.005
    record_criterion(6, ok, f"offset after impulse alignment {res.best_offset * 1e3:.1f} ms "
                            f"(impulse found at {imp:.4f} s)")
    assert ok


def _nearest(ref, t):
    t = np.asarray(t)
    if t.size == 0:
        return np.full(len(ref), np.inf)
    return np.array([np.min(np.abs(t - x)) for x in ref])


def test_criterion_7_ecg_annotation():
    correct = total = spurious = n_out = n_peaks = 0
    r_err = 0.0
    for hr in (45, 60, 75, 90, 105, 120):
        params = synth.SubjectParams(heart_rate_bpm=hr)
        _, truth = synth.synth_displacement(params, 60.0, seed=hr)
        rec = synth.synth_ecg(truth, start=0.0, duration=60.0, seed=hr)
        ann = ecg.annotate(rec)
        for true_t, got in ((truth.p_wave_times, ann.p_times),
                            (truth.r_times, ann.r_times),
                            (truth.t_wave_times, ann.t_times)):
            ref = truth.within(true_t, 0.5, 59.5)
            d = _nearest(ref, got)
            correct += int(np.sum(d <= 0.010))
            total += len(ref)
            inner = [x for x in got if 0.5 <= x <= 59.5]
            spurious += int(np.sum(_nearest(inner, true_t) > 0.010))
        r_err = max(r_err, float(np.max(_nearest(truth.within(truth.r_times, 0.5, 59.5),
                                                 ann.r_times))))
        n_out += len(ann.outliers)
        n_peaks += len(ann.p_times) + len(ann.r_times) + len(ann.t_times) + len(ann.outliers)
    accuracy = correct / (total + spurious)
    out_rate = n_out / n_peaks
    ok = accuracy >= 0.99 and r_err <= 0.005 and out_rate <= 0.01
    record_criterion(7, ok, f"label accuracy {accuracy * 100:.2f}%, worst R error "
                            f"{r_err * 1e3:.2f} ms, outlier rate {out_rate * 100:.2f}%")
    assert ok


def _naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def test_criterion_8_numeric_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_dft = worst_parseval = 0.0
    for n in range(1, 257):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        X = dsp.fft(x)
        ref = _naive_dft(x)
        worst_dft = max(worst_dft, np.max(np.abs(X - ref)) / np.max(np.abs(ref)))
        e_t, e_f = np.sum(np.abs(x) ** 2), np.sum(np.abs(X) ** 2) / n
        worst_parseval = max(worst_parseval, abs(e_t - e_f) / e_t)

    # zero-phase: a symmetric pulse stays symmetric about its centre
    fs = 2000.0
    pulse = np.exp(-0.5 * ((np.arange(8001) - 4000) / 40.0) ** 2)
    y = dsp.zero_phase_filter(pulse, "lowpass", fs)
    sym = np.max(np.abs(y - y[::-1])) / np.max(np.abs(y))

    # integrate / differentiate round trip on an oversampled band-limited signal
    t = np.arange(40000) / fs
    v = np.sin(2 * np.pi * 0.1 * t) + 0.5 * np.cos(2 * np.pi * 0.23 * t + 0.3)
    back = dsp.differentiate(dsp.integrate(v, fs), fs)
    rt1 = np.max(np.abs(back[2:-2] - v[2:-2])) / np.max(np.abs(v))
    again = dsp.integrate(dsp.differentiate(v, fs), fs)
    rt2 = np.max(np.abs((again - again[2])[2:-2] - (v - v[2])[2:-2])) / np.max(np.abs(v))

    # augmented-lead identity
    I, II = rng.standard_normal(5000), rng.standard_normal(5000)
    avr, avl, avf = ecg.compute_augmented_leads(I, II, II - I)
    lead_sum = np.max(np.abs(avr + avl + avf))

    # comb distance axioms on a shared grid
    grid = np.arange(-3, 13, 0.004)
    combs = [sync.build_pseudo_comb(np.sort(rng.uniform(0, 10, 8)), 0.1, grid)
             for _ in range(4)]
    d = sync.comb_distance
    axioms = all(d(a, a) == 0 and d(a, b) == d(b, a) and d(a, b) >= 0
                 and d(a, c) <= d(a, b) + d(b, c) + 1e-9
                 for a in combs for b in combs for c in combs)
    axioms = axioms and all(d(a, b) > 0 for i, a in enumerate(combs)
                            for j, b in enumerate(combs) if i != j)
    elapsed = time.perf_counter() - t0
    ok = (worst_dft <= 1e-9 and worst_parseval <= 1e-9 and sym <= 1e-9
          and rt1 <= 1e-6 and rt2 <= 1e-6 and lead_sum <= 1e-12 and axioms
          and elapsed < 60.0)
    record_criterion(8, ok, f"DFT {worst_dft:.1e}, Parseval {worst_parseval:.1e}, "
                            f"symmetry {sym:.1e}, round trips {rt1:.1e}/{rt2:.1e}, "
                            f"lead identity {lead_sum:.1e}, comb axioms {axioms}, {elapsed:.1f} s")
    assert ok


def _chain(out):
    b = str(out)
    steps = [
        ["synth", "--out-dir", b, "--seed", "9", "--duration", "12", "--offset", "-0.5",
         "--loss", "0.0"],
        ["ecg", "--bundle", b, "--seed", "9"],
        ["radar", "--bundle", b, "--seed", "9"],
        ["sync", "--bundle", b, "--seed", "9"],
        ["bench", "--bundle", b, "--seed", "9", "--loss", "0.01"],
    ]
    for argv in steps:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert cli.main(argv) == 0


def test_criterion_9_determinism(tmp_path):
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    _chain(a)
    _chain(b)
    names = sorted(p.name for p in a.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    ok = not mismatch and not errors and sorted(p.name for p in b.iterdir()) == names
    record_criterion(9, ok, f"{len(match)} files byte-identical, differing: {mismatch + errors}")
    assert ok
