import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from polybeam.acoustics import FreeFieldModel
from polybeam.design import design_rlsfi
from polybeam.geometry import ArrayGeometry, DesignGrid, Direction, interpolation_factors, make_design_grid
from polybeam.metrics import (
    BeampatternMap,
    MetricSeries,
    beampattern,
    di_series,
    directivity_index,
    fwsegsnr,
    mean_di_difference,
    response_mse,
    write_beampattern_csv,
    write_series_csv,
    wng,
    wng_db,
    wng_series,
)
from polybeam.sim import synthetic_speech

C = 343.0


def _point(az, el):
    return DesignGrid([az], [el], [4 * np.pi])


def test_single_omni_mic_is_flat():
    model = FreeFieldModel(ArrayGeometry([[0, 0, 0]]))
    bp = beampattern(np.ones(1), model, make_design_grid(10), 2000.0)
    assert_allclose(bp.values, 1)
    assert_allclose(directivity_index(bp, Direction(0, 90)), 0, atol=1e-12)
    assert wng(np.ones(1), np.ones(1)) == 1.0


def test_two_element_broadside_null():
    d, f = 0.06, 4000.0
    model = FreeFieldModel(ArrayGeometry([[d / 2, 0, 0], [-d / 2, 0, 0]], ))
    kd = 2 * np.pi * f * d / C
    phi = np.rad2deg(np.arccos(np.pi / kd))
    bp = beampattern(np.array([0.5, 0.5]), model, _point(phi, 90), f)
    assert abs(bp.values[0]) < 1e-12
    off = beampattern(np.array([0.5, 0.5]), model, _point(phi + 5, 90), f)
    assert abs(off.values[0]) > 1e-3


def test_pld_response_is_unity(desk_free):
    spec, fw, _ = desk_free
    for d in spec.plds:
        s = interpolation_factors(d)
        for f in fw.freqs[1:-1:8]:
            bp = beampattern(fw, spec.model, _point(d.az, d.el), f, s)
            assert abs(abs(bp.values[0]) - 1) <= 1e-6


def test_delay_and_sum_wng(free_field, rng):
    for f in [500.0, 3000.0]:
        a = free_field.response(2 * np.pi * f, [Direction(70, 100)])[0]
        assert_allclose(wng(a.conj() / 12, a), 12)
        assert_allclose(wng_db(a.conj() / 12, a), 10 * np.log10(12))
    # Cauchy-Schwarz ceiling for random weights
    for _ in range(50):
        w = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        assert wng(w, a) <= 12 * (1 + 1e-12)
    with pytest.raises(ValueError):
        wng(np.zeros(3), np.ones(3))


def test_design_wng_respects_bound(desk_free):
    spec, fw, _ = desk_free
    for d in spec.plds:
        s = wng_series(fw, spec.model, d, fw.freqs, interpolation_factors(d))
        assert np.all(10 ** (s.values / 10) >= spec.gamma - 1e-6)


def test_di_single_point_and_scaling():
    grid = make_design_grid(10)
    v = np.zeros(len(grid), complex)
    m = grid.nearest(Direction(90, 90))
    v[m] = 1
    bp = BeampatternMap(1000.0, grid, v)
    assert_allclose(directivity_index(bp, Direction(90, 90)), 10 * np.log10(4 * np.pi / grid.weights[m]))
    rng = np.random.default_rng(2)
    vals = rng.standard_normal(len(grid)) + 1j * rng.standard_normal(len(grid))
    di = directivity_index(BeampatternMap(1000.0, grid, vals), Direction(30, 40))
    for c in [1e-3, -2.0, 5j]:
        assert abs(directivity_index(BeampatternMap(1000.0, grid, c * vals), Direction(30, 40)) - di) <= 1e-12


def _endfire_pair(f, d=0.01):
    model = FreeFieldModel(ArrayGeometry([[d / 2, 0, 0], [-d / 2, 0, 0]]))
    w = np.array([1.0, -np.exp(-2j * np.pi * f * d / C)])
    return model, w, d


def _di_dense(f, d, step=0.25):
    """Midpoint rule on a fine (az, el) lattice, independent of DesignGrid."""
    el = np.deg2rad(np.arange(step / 2, 180, step))
    az = np.deg2rad(np.arange(step / 2, 360, step))
    E, A = np.meshgrid(el, az, indexing="ij")
    ux = np.sin(E) * np.cos(A)
    k = 2 * np.pi * f / C
    B = np.exp(1j * k * d * ux / 2) - np.exp(-1j * k * d) * np.exp(-1j * k * d * ux / 2)
    dA = np.deg2rad(step) ** 2 * np.sin(E)
    mean = np.sum(np.abs(B) ** 2 * dA) / (4 * np.pi)
    look = abs(np.exp(1j * k * d / 2) - np.exp(-1j * k * d) * np.exp(-1j * k * d / 2)) ** 2
    return 10 * np.log10(look / mean)


def test_endfire_cardioid_di_matches_dense_integration():
    f = 500.0
    model, w, d = _endfire_pair(f)
    bp = beampattern(w, model, make_design_grid(5), f)
    look = Direction(0, 90)
    a = model.response(2 * np.pi * f, [look])[0]
    di = directivity_index(bp, look, a @ w)
    ref = _di_dense(f, d)
    assert abs(di - ref) <= 0.02
    # low-frequency limit of a cardioid
    assert abs(ref - 10 * np.log10(3)) <= 0.01


def test_di_series_uses_exact_look_value(free_field):
    grid = make_design_grid(10)
    look = Direction(90, 90)
    freqs = [500.0, 2000.0]
    W = design_rlsfi(free_field, look, grid, freqs, 16000, 0.01)
    s = di_series(W[0], free_field, grid, look, [500.0])
    assert s.values.shape == (1,)
    assert s.unit == "dB"
    assert s.values[0] > 3


def _maps(vals, grid, f=1000.0):
    return [BeampatternMap(f, grid, np.asarray(v)) for v in vals]


def test_response_mse_examples():
    grid = make_design_grid(30)
    rng = np.random.default_rng(5)
    mag = rng.uniform(0, 1, len(grid))
    ph = np.exp(1j * rng.uniform(0, 2 * np.pi, len(grid)))
    b1 = _maps([mag * ph], grid)
    assert response_mse(b1, b1) == 0.0
    b2 = _maps([(mag + 0.1) * ph.conj()], grid)
    assert_allclose(response_mse(b1, b2), 0.01, rtol=1e-12)
    assert response_mse(b1, b2) == response_mse(b2, b1)
    with pytest.raises(ValueError):
        response_mse(b1, _maps([mag], make_design_grid(45)))


@settings(max_examples=30)
@given(st.lists(st.floats(-5, 5), min_size=26, max_size=26), st.lists(st.floats(-5, 5), min_size=26, max_size=26))
def test_response_mse_symmetric_nonnegative(a, b):
    grid = make_design_grid(45)
    n = len(grid)
    m1, m2 = _maps([np.array(a)[:n]], grid), _maps([np.array(b)[:n]], grid)
    v = response_mse(m1, m2)
    assert v >= 0
    assert v == response_mse(m2, m1)


def test_mean_di_difference_examples():
    f = np.array([300.0, 1000.0, 5000.0])
    a = MetricSeries(f, [10, 10, 10], "DI", "dB")
    b = MetricSeries(f, [8, 8, 8], "DI", "dB")
    assert mean_di_difference(a, a) == 0
    assert mean_di_difference(a, b) == 2
    with pytest.raises(ValueError):
        mean_di_difference(a, MetricSeries(f[:2], [1, 2], "DI", "dB"))


def test_design_and_fir_patterns_agree(desk_free):
    spec, fw, bf = desk_free
    grid = make_design_grid(30)
    s = interpolation_factors(Direction(100, 80))
    for f in fw.freqs[1::16]:
        b1 = beampattern(fw, spec.model, grid, f, s).values
        b2 = beampattern(bf, spec.model, grid, f, s).values
        assert np.max(np.abs(b1 - b2)) <= 10 ** (bf.design_error_db / 20) * np.max(np.abs(b1)) * 10 + 1e-12


# -- fwSegSNR ---------------------------------------------------------------

def _fwseg_oracle(ref, test, fs):
    """Loop-by-loop version of the frequency-weighted segmental SNR."""
    nwin = 512
    hop = 256
    win = [0.5 - 0.5 * math.cos(2 * math.pi * n / nwin) for n in range(nwin)]
    mel = lambda f: 2595 * math.log10(1 + f / 700)
    lo, hi = mel(50.0), mel(fs / 2)
    edges = [lo + (hi - lo) * j / 25 for j in range(26)]
    out = []
    for start in range(0, len(ref) - nwin + 1, hop):
        x = ref[start:start + nwin]
        y = test[start:start + nwin]
        if 10 * math.log10(np.mean(x**2) + 1e-300) <= -60:
            continue
        X = np.fft.rfft(x * win)
        Y = np.fft.rfft(y * win)
        px = [0.0] * 25
        py = [0.0] * 25
        for k in range(len(X)):
            m = mel(k * fs / nwin)
            for j in range(25):
                if edges[j] <= m < edges[j + 1] or (j == 24 and m == edges[25]):
                    px[j] += abs(X[k]) ** 2
                    py[j] += abs(Y[k]) ** 2
        num = den = 0.0
        for j in range(25):
            xa, ya = math.sqrt(px[j]), math.sqrt(py[j])
            if xa == 0:
                continue
            wj = xa**0.2
            num += wj * 10 * math.log10(xa**2 / (xa - ya) ** 2)
            den += wj
        out.append(min(35.0, max(-10.0, num / den)))
    return float(np.mean(out))


def test_fwsegsnr_matches_independent_oracle():
    fs = 16000.0
    s = synthetic_speech(2.0, fs, seed=3)
    rng = np.random.default_rng(11)
    n = rng.standard_normal(s.size)
    n *= np.sqrt(np.mean(s**2) / np.mean(n**2) / 10)  # 10 dB SNR
    y = s + n
    assert abs(fwsegsnr(s, y, fs) - _fwseg_oracle(s, y, fs)) <= 0.5


def test_fwsegsnr_limits():
    fs = 16000.0
    s = synthetic_speech(1.0, fs, seed=1)
    assert fwsegsnr(s, s, fs) == 35.0
    # a silent test signal leaves X - Y = X in every band: 0 dB per band
    assert_allclose(fwsegsnr(s, np.zeros_like(s), fs), 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        fwsegsnr(s, s[:-1], fs)
    with pytest.raises(ValueError, match="active"):
        fwsegsnr(np.zeros(4000), np.zeros(4000), fs)


def test_fwsegsnr_improves_with_snr():
    fs = 16000.0
    s = synthetic_speech(1.5, fs, seed=4)
    n = np.random.default_rng(0).standard_normal(s.size) * np.sqrt(np.mean(s**2))
    vals = [fwsegsnr(s, s + 10 ** (-snr / 20) * n, fs) for snr in [0, 10, 20]]
    assert vals[0] < vals[1] < vals[2]


def test_csv_writers(tmp_path):
    f = np.array([100.0, 200.0])
    write_series_csv(tmp_path / "s.csv", MetricSeries(f, [1.5, -2.0], "WNG", "dB"),
                     MetricSeries(f, [3.0, 4.0], "DI", "dB"))
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["freq_hz", "WNG_dB", "DI_dB"]
    assert [float(v) for v in rows[2]] == [200.0, -2.0, 4.0]
    grid = make_design_grid(90)
    bp = BeampatternMap(500.0, grid, np.arange(len(grid)) * (1 + 1j))
    write_beampattern_csv(tmp_path / "b.csv", bp)
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["az_deg", "el_deg", "real", "imag", "magnitude_db"]
    assert len(rows) == len(grid) + 1
    assert float(rows[1][4]) == -400.0
