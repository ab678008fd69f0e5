"""Beampatterns, white noise gain, directivity, response MSE and fwSegSNR."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .design import FreqWeights
from .fir import PolynomialBeamformer
from .geometry import DesignGrid, Direction, SteeringState

__all__ = [
    "BeampatternMap",
    "MetricSeries",
    "beampattern",
    "beampatterns",
    "di_series",
    "directivity_index",
    "fwsegsnr",
    "mean_di_difference",
    "mel_band_edges",
    "response_mse",
    "weights_at",
    "wng",
    "wng_db",
    "wng_series",
    "write_beampattern_csv",
    "write_series_csv",
]

DI_BAND = (300.0, 5000.0)


@dataclass
class BeampatternMap:
    """Complex response over the directions of a design grid at one frequency."""

    freq: float
    grid: DesignGrid
    values: np.ndarray
    state: SteeringState | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.grid),):
            raise ValueError("beampattern length does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("beampattern contains non-finite values")

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.values))

    def peak(self) -> Direction:
        m = int(np.argmax(np.abs(self.values)))
        return Direction(self.grid.az[m], self.grid.el[m])


@dataclass
class MetricSeries:
    freqs: np.ndarray
    values: np.ndarray
    label: str = ""
    unit: str = "dB"

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.freqs.shape != self.values.shape:
            raise ValueError("frequency and value arrays differ in length")
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("frequency axis must be strictly increasing")

    def band(self, lo: float, hi: float) -> "MetricSeries":
        sel = (self.freqs >= lo) & (self.freqs <= hi)
        return MetricSeries(self.freqs[sel], self.values[sel], self.label, self.unit)


def weights_at(source, freq: float, state: SteeringState | None = None) -> np.ndarray:
    """Effective per-mic weights ``(N,)`` of ``source`` at ``freq``.

    ``source`` is a :class:`FreqWeights` (exact values, ``freq`` must be one
    of its frequencies), a :class:`PolynomialBeamformer` (DTFT of the taps
    with the bulk delay removed) or a plain weight vector.
    """
    state = state or SteeringState()
    if isinstance(source, FreqWeights):
        idx = np.flatnonzero(np.isclose(source.freqs, freq, rtol=0, atol=1e-9 * source.fs))
        if idx.size == 0:
            raise ValueError(f"{freq} Hz is not a design frequency")
        return source.effective(state)[idx[0]]
    if isinstance(source, PolynomialBeamformer):
        W = source.frequency_response([freq])[0]
        return W.reshape(source.n_mics, -1) @ state.monomials(source.P, source.R)
    return np.asarray(source, dtype=complex).reshape(-1)


def beampattern(source, model, grid: DesignGrid, freq: float,
                state: SteeringState | None = None) -> BeampatternMap:
    """``B(omega, Omega_m) = sum_n W_n(omega) g_n(omega, Omega_m)`` over the grid."""
    w = weights_at(source, freq, state)
    G = model.response(2 * np.pi * freq, grid)
    return BeampatternMap(float(freq), grid, G @ w, state)


def beampatterns(source, model, grid, freqs, state=None) -> list[BeampatternMap]:
    return [beampattern(source, model, grid, f, state) for f in freqs]


def wng(w, a) -> float:
    """``|a^T w|^2 / ||w||^2`` (plain transpose)."""
    w = np.asarray(w, dtype=complex).reshape(-1)
    a = np.asarray(a, dtype=complex).reshape(-1)
    den = float(np.vdot(w, w).real)
    if den == 0.0:
        raise ValueError("WNG is undefined for a zero weight vector")
    return float(abs(a @ w) ** 2 / den)


def wng_db(w, a) -> float:
    return 10 * np.log10(wng(w, a))


def directivity_index(bp: BeampatternMap, look: Direction, look_value: complex | None = None) -> float:
    """Isotropic-diffuse directivity index in dB.

    The look-direction response is ``look_value`` when given, otherwise the
    value at the grid point nearest to ``look``.
    """
    if look_value is None:
        look_value = bp.values[bp.grid.nearest(look)]
    den = bp.grid.integrate(np.abs(bp.values) ** 2) / (4 * np.pi)
    if den <= 0.0:
        raise ValueError("directivity undefined: the response vanishes on the whole grid")
    num = abs(look_value) ** 2
    if num == 0.0:
        return -np.inf
    return float(10 * np.log10(num / den))


def wng_series(source, model, look: Direction, freqs, state=None) -> MetricSeries:
    vals = []
    for f in freqs:
        a = model.response(2 * np.pi * f, [look])[0]
        vals.append(wng_db(weights_at(source, f, state), a))
    return MetricSeries(freqs, vals, "WNG", "dB")


def di_series(source, model, grid, look: Direction, freqs, state=None) -> MetricSeries:
    vals = []
    for f in freqs:
        w = weights_at(source, f, state)
        bp = BeampatternMap(f, grid, model.response(2 * np.pi * f, grid) @ w, state)
        a = model.response(2 * np.pi * f, [look])[0]
        vals.append(directivity_index(bp, look, a @ w))
    return MetricSeries(freqs, vals, "DI", "dB")


def response_mse(b1, b2) -> float:
    """Mean squared difference of response magnitudes over frequencies and directions."""
    b1, b2 = list(b1), list(b2)
    if len(b1) != len(b2) or not b1:
        raise ValueError("need equally many, non-zero beampatterns")
    total = 0.0
    for x, y in zip(b1, b2):
        if len(x.grid) != len(y.grid) or not (
            np.array_equal(x.grid.az, y.grid.az) and np.array_equal(x.grid.el, y.grid.el)
        ):
            raise ValueError("beampatterns are defined on different grids")
        if not np.isclose(x.freq, y.freq):
            raise ValueError(f"frequency mismatch {x.freq} vs {y.freq}")
        total += float(np.sum((np.abs(x.values) - np.abs(y.values)) ** 2))
    return total / (len(b1) * len(b1[0].grid))


def mean_di_difference(series_a: MetricSeries, series_b: MetricSeries) -> float:
    """Mean of ``series_a`` minus mean of ``series_b`` (dB domain)."""
    if series_a.freqs.shape != series_b.freqs.shape or not np.allclose(series_a.freqs, series_b.freqs):
        raise ValueError("series use different frequency axes")
    return float(np.mean(series_a.values) - np.mean(series_b.values))


# --- frequency-weighted segmental SNR -------------------------------------

def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_band_edges(fs: float, n_bands: int = 25, f_lo: float = 50.0) -> np.ndarray:
    return _mel_to_hz(np.linspace(_hz_to_mel(f_lo), _hz_to_mel(fs / 2.0), n_bands + 1))


def fwsegsnr(reference, test, fs: float, frame_ms: float = 32.0, n_bands: int = 25,
             gamma: float = 0.2, floor_db: float = -10.0, ceil_db: float = 35.0,
             active_dbfs: float = -60.0) -> float:
    """Frequency-weighted segmental SNR in dB.

    Hann frames of ``frame_ms`` with 50 % overlap are split into ``n_bands``
    mel-spaced bands between 50 Hz and ``fs/2``.  Band SNRs
    ``10 log10(X^2 / (X - Y)^2)`` of band magnitudes are weighted by
    ``X^gamma``; each frame value is clamped to ``[floor_db, ceil_db]`` and
    the mean is taken over frames whose reference level exceeds
    ``active_dbfs``.
    """
    x = np.asarray(reference, dtype=float).reshape(-1)
    y = np.asarray(test, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"reference and test differ in length ({x.size} vs {y.size})")
    if fs <= 0:
        raise ValueError("fs must be positive")
    nwin = int(round(frame_ms * 1e-3 * fs))
    hop = nwin // 2
    if x.size < nwin:
        x = np.pad(x, (0, nwin - x.size))
        y = np.pad(y, (0, nwin - y.size))
    n_frames = 1 + (x.size - nwin) // hop
    idx = np.arange(nwin)[None, :] + hop * np.arange(n_frames)[:, None]
    fx, fy = x[idx], y[idx]
    level = 10 * np.log10(np.mean(fx ** 2, axis=1) + 1e-300)
    active = level > active_dbfs
    if not np.any(active):
        raise ValueError("no active reference frames above the level threshold")
    win = signal.get_window("hann", nwin)
    X = np.abs(np.fft.rfft(fx[active] * win, axis=1)) ** 2
    Y = np.abs(np.fft.rfft(fy[active] * win, axis=1)) ** 2
    bins = np.fft.rfftfreq(nwin, 1.0 / fs)
    edges = mel_band_edges(fs, n_bands)
    band = np.searchsorted(edges, bins, side="right") - 1
    band[bins == edges[-1]] = n_bands - 1
    ok = (band >= 0) & (band < n_bands)
    S = np.zeros((len(bins), n_bands))
    S[np.flatnonzero(ok), band[ok]] = 1.0
    Xb = np.sqrt(X @ S)
    Yb = np.sqrt(Y @ S)
    err = (Xb - Yb) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = 10 * np.log10(Xb ** 2 / err)
    Wt = Xb ** gamma
    used = Wt > 0
    # an exact band match has infinite SNR and pins the frame to the ceiling
    exact = np.any(used & (err == 0), axis=1)
    snr = np.where(used & (err > 0), snr, 0.0)
    wsum = np.sum(Wt * used, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frame = np.sum(Wt * snr, axis=1) / wsum
    frame = np.where(exact, ceil_db, frame)
    frame = np.where(wsum > 0, frame, floor_db)
    return float(np.mean(np.clip(frame, floor_db, ceil_db)))


# --- CSV export ------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def write_series_csv(path, *series: MetricSeries) -> None:
    """Columns ``freq_hz`` then one ``<label>_<unit>`` column per series."""
    if not series:
        raise ValueError("nothing to write")
    f0 = series[0].freqs
    for s in series[1:]:
        if not np.array_equal(s.freqs, f0):
            raise ValueError("series must share the frequency axis")
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz"] + [f"{s.label}_{s.unit}" for s in series])
        for i, f in enumerate(f0):
            w.writerow([_fmt(f)] + [_fmt(s.values[i]) for s in series])


def write_beampattern_csv(path, bp: BeampatternMap) -> None:
    """Columns ``az_deg, el_deg, real, imag, magnitude_db`` (one row per grid point)."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["az_deg", "el_deg", "real", "imag", "magnitude_db"])
        mag = bp.magnitude_db
        for a, e, v, m in zip(bp.grid.az, bp.grid.el, bp.values, mag):
            w.writerow([_fmt(a), _fmt(e), _fmt(v.real), _fmt(v.imag), _fmt(max(m, -400.0))])
