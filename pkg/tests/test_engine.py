import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from polybeam.engine import Processor, effective_filters, filter_signal, process_with_trajectory
from polybeam.fir import PolynomialBeamformer
from polybeam.geometry import Direction, SteeringState, interpolation_factors, make_design_grid
from polybeam.metrics import beampattern


def _direct(bf, state, x):
    """Brute-force filter-and-sum by explicit convolution sums."""
    h = bf.effective_filters(state)
    N, T = x.shape
    y = np.zeros(T)
    for n in range(N):
        for k in range(T):
            lo = max(0, k - bf.L + 1)
            y[k] += np.dot(h[n, :k - lo + 1], x[n, k:lo - 1 if lo else None:-1])
    return y


def _toy_bf(rng, N=3, P=1, R=1, L=16):
    return PolynomialBeamformer(N, P, R, 16000.0, rng.standard_normal((N * (P + 1) * (R + 1), L)))


def test_effective_filter_examples(rng):
    bf = _toy_bf(rng)
    assert_array_equal(effective_filters(bf, SteeringState(0, 0)), bf.filters[:, 0, 0])
    flat = _toy_bf(rng, P=0, R=0)
    assert_array_equal(effective_filters(flat, SteeringState(0.7, -0.2)), flat.taps)
    s = SteeringState(0.5, -0.25)
    ref = sum(s.d_theta**r * s.d_phi**p * bf.filters[:, r, p] for r in range(2) for p in range(2))
    assert_allclose(effective_filters(bf, s), ref, atol=1e-14)


def test_zero_input_gives_zero(rng):
    bf = _toy_bf(rng)
    proc = Processor(bf, SteeringState(0.3, 0.1))
    assert_array_equal(proc.process(np.zeros((3, 100)), 7), np.zeros(100))


def test_delta_filter_delays_input(rng):
    L = 16
    taps = np.zeros((1, L))
    taps[0, L // 2 + 2] = 1
    bf = PolynomialBeamformer(1, 0, 0, 16000.0, taps)
    x = rng.standard_normal(200)
    y = Processor(bf).process(x[None, :], 33)
    assert_allclose(y[L // 2 + 2:], x[:-(L // 2 + 2)], atol=1e-14)
    assert_allclose(y[:L // 2 + 2], 0, atol=1e-14)


def test_direct_oracle_matches_one_shot(rng):
    bf = _toy_bf(rng)
    x = rng.standard_normal((3, 80))
    s = SteeringState(-0.4, 0.9)
    assert_allclose(filter_signal(bf, s, x), _direct(bf, s, x), atol=1e-12)


@pytest.mark.parametrize("B", [1, 7, 64, 4096])
@pytest.mark.parametrize("reference", [False, True])
def test_streaming_equals_batch(desk_free, rng, B, reference):
    _, _, bf = desk_free
    x = rng.standard_normal((12, 5000))
    s = SteeringState(1 / 3, -0.2)
    ref = filter_signal(bf, s, x)
    y = Processor(bf, s, reference=reference).process(x, B)
    assert np.max(np.abs(y - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_steering_change_matches_fresh_processor(desk_free, rng):
    _, _, bf = desk_free
    B = 64
    x = rng.standard_normal((12, 10 * B))
    a, b = SteeringState(0, 0), SteeringState(0.5, 0.5)
    proc = Processor(bf, a)
    out = [proc.process_block(x[:, :3 * B])]
    proc.set_steering(b)
    for k in range(3 * B, 10 * B, B):
        out.append(proc.process_block(x[:, k:k + B]))
    y = np.concatenate(out)
    ya = filter_signal(bf, a, x)
    yb = filter_signal(bf, b, x)
    # fresh processor with full history: every block after the crossfade block
    assert_allclose(y[4 * B:], yb[4 * B:], atol=1e-11)
    assert_allclose(y[:3 * B], ya[:3 * B], atol=1e-11)
    ramp = np.arange(1, B + 1) / B
    assert_allclose(y[3 * B:4 * B], ya[3 * B:4 * B] + ramp * (yb - ya)[3 * B:4 * B], atol=1e-11)


def test_set_same_state_is_bit_identical(desk_free, rng):
    _, _, bf = desk_free
    x = rng.standard_normal((12, 512))
    s = SteeringState(0.2, 0.2)
    p1, p2 = Processor(bf, s), Processor(bf, s)
    y1 = np.concatenate([p1.process_block(x[:, k:k + 128]) for k in range(0, 512, 128)])
    out = []
    for k in range(0, 512, 128):
        p2.set_steering(SteeringState(0.2, 0.2))
        out.append(p2.process_block(x[:, k:k + 128]))
    assert_array_equal(np.concatenate(out), y1)


def test_alternating_states_with_zero_input(desk_free):
    _, _, bf = desk_free
    proc = Processor(bf)
    for k in range(10):
        proc.set_steering(SteeringState(0.5 * (-1) ** k, 0.1 * k % 1))
        assert_array_equal(proc.process_block(np.zeros((12, 32))), 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(1, 300))
def test_linearity(alpha, beta, B):
    rng = np.random.default_rng(B)
    bf = _toy_bf(rng)
    x1 = rng.standard_normal((3, 400))
    x2 = rng.standard_normal((3, 400))
    s = SteeringState(0.25, -0.75)
    y = Processor(bf, s).process(alpha * x1 + beta * x2, B)
    y1 = Processor(bf, s).process(x1, B)
    y2 = Processor(bf, s).process(x2, B)
    assert_allclose(y, alpha * y1 + beta * y2, atol=1e-12 * (1 + abs(alpha) + abs(beta)) * 10)


def test_sinusoid_gain_matches_beampattern(desk_free):
    spec, fw, bf = desk_free
    fs = fw.fs
    look = Direction(90, 90)
    state = interpolation_factors(Direction(120, 90))
    grid = make_design_grid(90)
    idx = int(np.flatnonzero((grid.az == 90) & (grid.el == 90))[0])
    T = 2000
    k = np.arange(T)
    for q in [9, 23, 40]:  # design frequencies: realization is exact there
        f = fw.freqs[q]
        g = spec.model.response(2 * np.pi * f, [look])[0]
        x = np.real(g[:, None] * np.exp(2j * np.pi * f * k / fs)[None, :])
        y = Processor(bf, state).process(x, 256)
        B_opt = beampattern(fw, spec.model, grid, f, state).values[idx]
        expected = np.real(B_opt * np.exp(2j * np.pi * f * (k - bf.bulk_delay) / fs))
        assert_allclose(y[bf.L:], expected[bf.L:], atol=1e-9)


def test_channel_mismatch_and_bad_state(rng):
    bf = _toy_bf(rng)
    proc = Processor(bf)
    with pytest.raises(ValueError, match="channels"):
        proc.process_block(np.zeros((2, 10)))
    with pytest.raises(ValueError, match="non-finite"):
        proc.process_block(np.full((3, 4), np.nan))
    with pytest.raises(TypeError):
        proc.set_steering((0.1, 0.2))
    assert proc.latency == 8


def test_trajectory_switches_at_block_boundary(desk_free, rng):
    _, _, bf = desk_free
    x = rng.standard_normal((12, 2048))
    a, b = SteeringState(0, 0), SteeringState(-0.5, 0.25)
    # 0.02 s = sample 320, first boundary at or after it with B=256 is 512
    y = process_with_trajectory(bf, x, 16000.0, [(0.0, a), (0.02, b)], block_size=256)
    assert_allclose(y[:512], filter_signal(bf, a, x)[:512], atol=1e-11)
    assert_allclose(y[768:], filter_signal(bf, b, x)[768:], atol=1e-11)
