import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cardioradar import ecg, sync
from cardioradar.errors import AlignmentFailed, InvalidArgument, SyncFailed


def _beats(seed, n=30, mean=0.9, jitter=0.08):
    rng = np.random.default_rng(seed)
    return np.cumsum(mean + jitter * rng.standard_normal(n))


# pseudo-comb ---------------------------------------------------------------

def test_comb_peak_height():
    v = sync.comb_values([0.0], 0.1, [0.0])
    assert v[0] == pytest.approx(1 / (0.1 * np.sqrt(np.pi)))
    assert v[0] == pytest.approx(5.6419, abs=1e-4)


def test_comb_half_maximum_position():
    a = 0.1
    x = np.sqrt(a * np.log(2))
    peak = sync.comb_values([0.0], a, [0.0])[0]
    assert sync.comb_values([0.0], a, [x])[0] == pytest.approx(peak / 2)
    assert x == pytest.approx(0.2633, abs=1e-4)


def test_comb_area_per_event():
    # the exponent divides by a, so each bump integrates to 1 / sqrt(a)
    a, step = 0.1, 1e-3
    grid = np.arange(-5, 5, step)
    c = sync.build_pseudo_comb([0.0], a, grid)
    assert c.values.sum() * step == pytest.approx(1 / np.sqrt(a), rel=1e-9)


def test_gaussian_variant_has_unit_area():
    step = 1e-3
    grid = np.arange(-2, 2, step)
    c = sync.build_pseudo_comb([0.0], 0.1, grid, gaussian=True)
    assert c.values.sum() * step == pytest.approx(1.0, rel=1e-9)


def test_comb_requires_nonzero_a_and_uniform_grid():
    with pytest.raises(InvalidArgument):
        sync.comb_values([0.0], 0.0, [0.0])
    with pytest.raises(InvalidArgument):
        sync.build_pseudo_comb([0.0], 0.1, [0.0, 0.1, 0.3])


def test_comb_distance_examples():
    grid = np.arange(-3, 13, 0.004)
    a = sync.build_pseudo_comb([1.0, 2.0, 3.5], 0.1, grid)
    assert sync.comb_distance(a, a) == 0.0
    far = sync.build_pseudo_comb([8.0, 9.0, 10.5], 0.1, grid)
    # no overlap: the distance is the sum of both combs
    assert sync.comb_distance(a, far) == pytest.approx(a.values.sum() + far.values.sum())


def test_comb_distance_grid_mismatch():
    a = sync.build_pseudo_comb([1.0], 0.1, np.arange(0, 5, 0.004))
    b = sync.build_pseudo_comb([1.0], 0.1, np.arange(0, 5, 0.008))
    with pytest.raises(InvalidArgument):
        sync.comb_distance(a, b)


# offset search -------------------------------------------------------------

@pytest.mark.parametrize("offset", [-1.8, -0.5, 0.3, 1.7])
def test_find_offset_recovers_known_shift(offset):
    r = _beats(1)
    res = sync.find_offset(r, r + offset)
    assert res.best_offset == pytest.approx(offset, abs=0.004)
    assert res.method == "comb"
    assert len(res.shifts) == len(res.distances) == 1001


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.integers(-300, 300), st.integers(-50, 50))
def test_find_offset_shift_equivariance(seed, k, extra):
    step = 0.004
    r = _beats(seed, n=25)
    base = sync.find_offset(r, r + k * step).best_offset
    moved = sync.find_offset(r, r + (k + extra) * step).best_offset
    assert moved - base == pytest.approx(extra * step, abs=1e-9)


def test_find_offset_ignores_missing_and_extra_events():
    r = _beats(2, n=35)
    radar = np.delete(r + 0.7, [5, 17])
    radar = np.sort(np.r_[radar, 11.13])
    assert sync.find_offset(r, radar).best_offset == pytest.approx(0.7, abs=0.004)


def test_periodic_rhythm_warns():
    r = np.arange(30) * 1.0
    with pytest.warns(sync.PeriodicRhythmWarning):
        res = sync.find_offset(r, r + 0.25)
    assert res.diagnostics["degenerate"]


def test_periodic_rhythm_has_minima_one_period_apart():
    # period 1 s with half range 2 s: secondary minima one period away
    r = np.arange(30) * 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = sync.find_offset(r, r + 0.248)
    assert res.best_offset == pytest.approx(0.248, abs=1e-9)
    d = res.distances
    for s in (-0.752, 1.248):
        i = int(np.argmin(np.abs(res.shifts - s)))
        assert d[i] < d[i - 1] and d[i] < d[i + 1]
        assert d[i] > d[int(np.argmin(d))]


def test_too_few_events():
    with pytest.raises(SyncFailed):
        sync.find_offset([1.0, 2.0], [1.0, 2.0, 3.0])


def test_sync_result_serialises():
    r = _beats(3)
    d = sync.find_offset(r, r - 0.2).to_dict()
    assert d["method"] == "comb"
    assert len(d["curve"]) == 1001
    assert d["best_offset_s"] == pytest.approx(-0.2, abs=0.004)


def test_manual_alignment():
    res = sync.align_manual(r_time=2.10, peak_time=2.35)
    assert res.best_offset == pytest.approx(0.25)
    assert res.method == "manual"


# impulse alignment ---------------------------------------------------------

def _flat_record(duration, fs=2000.0):
    n = int(duration * fs)
    return ecg.EcgRecord({"I": np.arange(n, dtype=float)}, fs, 0.0)


def test_align_by_impulse_worked_example():
    rec = _flat_record(33.0)
    out = sync.align_by_impulse(rec, 3.0)
    assert out.t0 == pytest.approx(1.0)
    assert out.t0 + out.duration == pytest.approx(30.0)
    # first kept sample is the original sample at 4.0 s
    assert out.leads["I"][0] == 4.0 * 2000


def test_align_by_impulse_at_zero_only_trims():
    rec = _flat_record(5.0)
    out = sync.align_by_impulse(rec, 0.0)
    assert out.t0 == pytest.approx(1.0)
    assert len(out) == len(rec) - 2000


def test_align_by_impulse_failures():
    rec = _flat_record(5.0)
    with pytest.raises(AlignmentFailed):
        sync.align_by_impulse(rec, None)
    with pytest.raises(AlignmentFailed):
        sync.align_by_impulse(rec, 7.0)
    with pytest.raises(AlignmentFailed):
        sync.align_by_impulse(rec, 4.5)


def test_trim_series():
    t = np.arange(10) * 0.25
    kept_t, kept_v = sync.trim_series(t, t * 2)
    assert kept_t[0] == 1.0
    np.testing.assert_allclose(kept_v, kept_t * 2)
