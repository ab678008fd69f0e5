"""Frequency-sampling FIR realization of designed polynomial beamformers."""

from __future__ import annotations

import json
import logging
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import FreqWeights
from .geometry import SteeringState

__all__ = [
    "PolynomialBeamformer",
    "RealizationWarning",
    "dtft",
    "load_beamformer",
    "realize_fir",
    "save_beamformer",
]

log = logging.getLogger(__name__)

MAGIC = b"PBFIR\x00"
VERSION = 1
BAND = (0.02, 0.48)
WARN_DB = -40.0


class RealizationWarning(UserWarning):
    pass


def dtft(taps: np.ndarray, freqs, fs: float) -> np.ndarray:
    """DTFT of ``taps`` (``(..., L)``) at ``freqs`` in Hz; returns ``(F, ...)``."""
    taps = np.asarray(taps, dtype=float)
    L = taps.shape[-1]
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    kern = np.exp(-2j * np.pi * np.outer(freqs, np.arange(L)) / fs)  # (F, L)
    return np.tensordot(kern, taps, axes=([1], [-1]))


@dataclass
class PolynomialBeamformer:
    """``N (P+1)(R+1)`` FIR filters of length ``L``, ordered mic, elevation order, azimuth order."""

    n_mics: int
    P: int
    R: int
    fs: float
    taps: np.ndarray  # (N (P+1)(R+1), L)
    spec_hash: str = ""
    design_error_db: float = -np.inf
    offgrid_error_db: float | None = None

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=float)
        if self.taps.shape[0] != self.n_mics * (self.P + 1) * (self.R + 1):
            raise ValueError("filter count must equal N (P+1)(R+1)")
        if not np.all(np.isfinite(self.taps)):
            raise ValueError("non-finite filter taps")

    @property
    def L(self) -> int:
        return self.taps.shape[1]

    @property
    def bulk_delay(self) -> int:
        return self.L // 2

    @property
    def filters(self) -> np.ndarray:
        """Taps as ``(N, R+1, P+1, L)``."""
        return self.taps.reshape(self.n_mics, self.R + 1, self.P + 1, self.L)

    def effective_filters(self, state: SteeringState) -> np.ndarray:
        """Collapse the polynomial for a fixed steering state: ``(N, L)``."""
        m = state.monomials(self.P, self.R)
        return np.tensordot(self.taps.reshape(self.n_mics, -1, self.L), m, axes=([1], [0]))

    def frequency_response(self, freqs, compensate_delay: bool = True) -> np.ndarray:
        """Stacked filter responses ``(F, N (P+1)(R+1))``; bulk delay removed by default."""
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        W = dtft(self.taps, freqs, self.fs)
        if compensate_delay:
            W *= np.exp(2j * np.pi * freqs * self.bulk_delay / self.fs)[:, None]
        return W

    def summary(self) -> dict:
        return {
            "n_mics": self.n_mics,
            "P": self.P,
            "R": self.R,
            "L": self.L,
            "fs": self.fs,
            "bulk_delay": self.bulk_delay,
            "n_filters": int(self.taps.shape[0]),
            "spec_hash": self.spec_hash,
            "design_error_db": _finite(self.design_error_db),
            "offgrid_error_db": _finite(self.offgrid_error_db),
        }


def _finite(x):
    if x is None:
        return None
    return float(x) if np.isfinite(x) else -400.0


def _relative_error_db(realized, target):
    num = np.linalg.norm(realized - target, axis=1)
    den = np.maximum(np.linalg.norm(target, axis=1), 1e-300)
    return 20 * np.log10(max(np.max(num / den), 1e-20))


def realize_fir(fw: FreqWeights, L: int | None = None, dense: FreqWeights | None = None) -> PolynomialBeamformer:
    """Frequency-sampling realization with a bulk delay of ``L/2`` samples.

    Each weight sequence is multiplied by ``exp(-j omega L/2 / fs)``, extended
    conjugate-symmetrically to ``L`` bins and inverse transformed.  The
    result reproduces the weights exactly at the design frequencies.  When
    ``dense`` (optimal weights at off-grid frequencies) is given, the largest
    in-band deviation between realized and optimal responses is recorded.
    """
    Q = len(fw.freqs)
    if L is None:
        L = 2 * (Q - 1)
    if L % 2 or Q != L // 2 + 1:
        raise ValueError(f"{Q} design frequencies do not match FIR length {L} (need L/2 + 1)")
    grid = np.arange(Q) * fw.fs / L
    if not np.allclose(fw.freqs, grid, rtol=0, atol=1e-9 * fw.fs):
        raise ValueError("design frequencies are not the uniform DFT grid of length L")
    W = np.asarray(fw.weights)
    for q in (0, Q - 1):
        if np.max(np.abs(W[q].imag)) > 1e-9:
            raise ValueError(f"weights at {fw.freqs[q]:g} Hz must be real for a real filter")
    spec = W * ((-1.0) ** np.arange(Q))[:, None]  # exp(-j pi q) bulk delay
    spec[0] = spec[0].real
    spec[-1] = spec[-1].real
    full = np.concatenate([spec, np.conj(spec[-2:0:-1])], axis=0)
    taps_c = np.fft.ifft(full, axis=0)
    scale = max(1.0, float(np.max(np.abs(taps_c.real))))
    residue = float(np.max(np.abs(taps_c.imag)))
    assert residue <= 1e-12 * scale, f"imaginary residue {residue:.3e} after inverse transform"
    taps = np.ascontiguousarray(taps_c.real.T)

    bf = PolynomialBeamformer(fw.n_mics, fw.P, fw.R, fw.fs, taps, fw.spec_hash)
    bf.design_error_db = _relative_error_db(bf.frequency_response(fw.freqs), W)
    if dense is not None:
        bf.offgrid_error_db = realization_error(bf, dense)
        if bf.offgrid_error_db > WARN_DB:
            warnings.warn(
                f"in-band FIR realization deviation {bf.offgrid_error_db:.1f} dB exceeds {WARN_DB} dB",
                RealizationWarning,
                stacklevel=2,
            )
    return bf


def realization_error(bf: PolynomialBeamformer, dense: FreqWeights, band=BAND) -> float:
    """Max relative deviation (dB) between realized and optimal weights in band."""
    f = np.asarray(dense.freqs)
    sel = (f >= band[0] * bf.fs) & (f <= band[1] * bf.fs)
    if not np.any(sel):
        raise ValueError("no reference frequencies inside the evaluation band")
    return _relative_error_db(bf.frequency_response(f[sel]), np.asarray(dense.weights)[sel])


def save_beamformer(bf: PolynomialBeamformer, path) -> None:
    """Binary artifact plus a ``.txt`` JSON sidecar summary.

    Layout (little endian): magic ``PBFIR\\0``, u16 version, u32 N, u32 P,
    u32 R, u32 L, f64 fs, 64 ASCII bytes spec hash, then ``N(P+1)(R+1) * L``
    f64 taps, filter-major with mic outer, elevation order middle, azimuth
    order inner.
    """
    path = Path(path)
    head = MAGIC + struct.pack("<HIIIId", VERSION, bf.n_mics, bf.P, bf.R, bf.L, bf.fs)
    head += bf.spec_hash.encode("ascii").ljust(64, b"\x00")[:64]
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(bf.taps.astype("<f8").tobytes())
    path.with_suffix(".txt").write_text(json.dumps(bf.summary(), indent=2, sort_keys=True) + "\n")


def load_beamformer(path) -> PolynomialBeamformer:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a beamformer artifact")
    off = len(MAGIC)
    version, N, P, R, L, fs = struct.unpack_from("<HIIIId", data, off)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported artifact version {version}")
    off += struct.calcsize("<HIIIId")
    spec_hash = data[off:off + 64].rstrip(b"\x00").decode("ascii")
    off += 64
    count = N * (P + 1) * (R + 1) * L
    if off + 8 * count != len(data):
        raise ValueError(f"{path}: truncated or oversized tap block")
    taps = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(-1, L)
    bf = PolynomialBeamformer(N, P, R, fs, taps.astype(float), spec_hash)
    side = Path(path).with_suffix(".txt")
    if side.is_file():
        meta = json.loads(side.read_text())
        bf.design_error_db = meta.get("design_error_db", bf.design_error_db)
        bf.offgrid_error_db = meta.get("offgrid_error_db")
    return bf
