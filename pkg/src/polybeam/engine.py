"""Streaming polynomial filter-and-sum processing.

For block-constant steering the polynomial collapses into ``N`` effective
filters, so the default path runs ``N`` convolutions per block.  The
``reference`` mode instead runs every filter-and-sum unit and combines the
unit outputs with the monomials, mirroring the block structure of the
processor; both modes produce the same samples up to rounding.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .fir import PolynomialBeamformer
from .geometry import SteeringState

__all__ = ["Processor", "effective_filters", "filter_signal", "process_with_trajectory"]

# below this many taps * samples a direct sum beats the FFT
_DIRECT_LIMIT = 4096


def effective_filters(bf: PolynomialBeamformer, state: SteeringState) -> np.ndarray:
    """Per-mic filters ``(N, L)`` for a fixed steering state."""
    return bf.effective_filters(state)


def filter_signal(bf: PolynomialBeamformer, state: SteeringState, x) -> np.ndarray:
    """One-shot filter-and-sum of ``x`` (``(N, T)``), truncated to ``T`` samples."""
    x = _check_input(x, bf.n_mics)
    h = effective_filters(bf, state)
    T = x.shape[1]
    if T == 0:
        return np.zeros(0)
    y = signal.fftconvolve(x, h, axes=1)[:, :T]
    return y.sum(axis=0)


def _check_input(x, n_mics):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and n_mics == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] != n_mics:
        raise ValueError(f"expected {n_mics} input channels, got array of shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite samples")
    return x


class Processor:
    """Block-wise overlap-save beamformer with runtime steering.

    Blocks may have any length.  A steering change takes effect on the next
    block, whose output is a linear crossfade from the old to the new
    filters over the length of that block.  Because the state kept between
    blocks is input history only, the output after the crossfade block is
    identical to that of a processor created with the new state.
    """

    def __init__(self, bf: PolynomialBeamformer, state: SteeringState | None = None,
                 crossfade: bool = True, reference: bool = False):
        self.bf = bf
        self.state = state if state is not None else SteeringState()
        self.crossfade = crossfade
        self.reference = reference
        self._history = np.zeros((bf.n_mics, bf.L - 1))
        self._pending = None  # previous state awaiting a crossfade
        self._spectra = {}
        self._filters = {}

    @property
    def n_mics(self) -> int:
        return self.bf.n_mics

    @property
    def latency(self) -> int:
        return self.bf.bulk_delay

    def reset(self) -> None:
        self._history[:] = 0.0
        self._pending = None

    def set_steering(self, state: SteeringState) -> None:
        if not isinstance(state, SteeringState):
            raise TypeError("state must be a SteeringState")
        if state == self.state:
            return
        if self.crossfade and self._pending is None:
            self._pending = self.state
        self.state = state

    # filter banks -------------------------------------------------------
    def _bank(self, state):
        """Filters to run and per-output combination weights."""
        if self.reference:
            K = (self.bf.P + 1) * (self.bf.R + 1)
            taps = self.bf.taps.reshape(self.n_mics, K, self.bf.L)
            return taps, state.monomials(self.bf.P, self.bf.R)
        if state not in self._filters:
            if len(self._filters) > 4:
                self._filters.clear()
            self._filters[state] = effective_filters(self.bf, state)[:, None, :]
        return self._filters[state], np.ones(1)

    def _spectrum(self, taps, nfft):
        key = (id(taps), nfft)
        hit = self._spectra.get(key)
        if hit is None or hit[0] is not taps:
            if len(self._spectra) > 8:
                self._spectra.clear()
            hit = (taps, np.fft.rfft(taps, n=nfft, axis=-1))
            self._spectra[key] = hit
        return hit[1]

    def _run(self, state, buf, B):
        taps, comb = self._bank(state)
        L = self.bf.L
        if B * L <= _DIRECT_LIMIT:
            # windows[n, k, l] = buf[n, k + L - 1 - l]
            win = np.lib.stride_tricks.sliding_window_view(buf, L, axis=1)[:, :, ::-1]
            units = np.einsum("nkl,ncl->ck", win, taps)
        else:
            nfft = 1 << int(np.ceil(np.log2(buf.shape[1])))
            X = np.fft.rfft(buf, n=nfft, axis=1)
            H = self._spectrum(taps, nfft)
            Y = np.einsum("nf,ncf->cf", X, H)
            units = np.fft.irfft(Y, n=nfft, axis=1)[:, L - 1:L - 1 + B]
        return comb @ units

    def process_block(self, block) -> np.ndarray:
        """Filter one ``(N, B)`` block; returns ``B`` output samples."""
        x = _check_input(block, self.n_mics)
        B = x.shape[1]
        if B == 0:
            return np.zeros(0)
        buf = np.concatenate([self._history, x], axis=1)
        y = self._run(self.state, buf, B)
        if self._pending is not None:
            old = self._run(self._pending, buf, B)
            ramp = np.arange(1, B + 1) / B
            y = old + ramp * (y - old)
            self._pending = None
        self._history = buf[:, buf.shape[1] - (self.bf.L - 1):].copy()
        return y

    def process(self, x, block_size: int = 1024) -> np.ndarray:
        """Stream a whole ``(N, T)`` signal through in blocks of ``block_size``."""
        x = _check_input(x, self.n_mics)
        out = [self.process_block(x[:, k:k + block_size]) for k in range(0, x.shape[1], block_size)]
        return np.concatenate(out) if out else np.zeros(0)


def process_with_trajectory(bf: PolynomialBeamformer, x, fs: float, trajectory, block_size: int = 256,
                            crossfade: bool = True) -> np.ndarray:
    """Process ``x`` while following ``[(time_s, SteeringState), ...]``.

    Steering changes are applied at the first block boundary at or after
    their timestamp.
    """
    x = _check_input(x, bf.n_mics)
    traj = list(trajectory) or [(0.0, SteeringState())]
    proc = Processor(bf, traj[0][1], crossfade=crossfade)
    out = []
    idx = 0
    for k in range(0, x.shape[1], block_size):
        t = k / fs
        while idx + 1 < len(traj) and traj[idx + 1][0] <= t:
            idx += 1
        proc.set_steering(traj[idx][1])
        out.append(proc.process_block(x[:, k:k + block_size]))
    return np.concatenate(out) if out else np.zeros(0)
