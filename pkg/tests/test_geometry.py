import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from polybeam.geometry import (
    ArrayGeometry,
    Direction,
    SteeringError,
    SteeringState,
    angular_distance,
    interpolation_factors,
    linear_array,
    make_design_grid,
    make_pld_grid,
    spherical_cap_array,
)

angles_az = st.floats(0, 360, allow_nan=False, exclude_max=True)
angles_el = st.floats(0, 180, allow_nan=False)


def test_direction_normalizes_azimuth():
    assert Direction(-90, 45).az == 270.0
    assert Direction(720, 10).az == 0.0
    with pytest.raises(ValueError):
        Direction(0, 181)
    with pytest.raises(ValueError):
        Direction(np.nan, 0)


def test_unit_vector_axes():
    assert_allclose(Direction(0, 90).unit, [1, 0, 0], atol=1e-15)
    assert_allclose(Direction(90, 90).unit, [0, 1, 0], atol=1e-15)
    assert_allclose(Direction(123, 0).unit, [0, 0, 1], atol=1e-15)


@pytest.mark.parametrize("step, count", [(5, 2522), (10, 614), (90, 6)])
def test_design_grid_counts(step, count):
    g = make_design_grid(step)
    assert len(g) == count
    assert_allclose(g.weights.sum(), 4 * np.pi, rtol=1e-12)
    assert np.all(g.weights > 0)


def test_design_grid_rejects_bad_step():
    with pytest.raises(ValueError):
        make_design_grid(7)
    with pytest.raises(ValueError):
        make_design_grid(0)


def test_design_grid_quadrature_accuracy():
    # integral of cos^2(el) over the sphere is 4 pi / 3
    g = make_design_grid(5)
    val = g.integrate(np.cos(np.deg2rad(g.el)) ** 2)
    assert_allclose(val, 4 * np.pi / 3, rtol=5e-3)


def test_interpolation_factors_examples():
    s = interpolation_factors(Direction(120, 90))
    assert_allclose([s.d_phi, s.d_theta], [1 / 3, 0], atol=1e-15)
    s = interpolation_factors(Direction(30, 30))
    assert_allclose([s.d_phi, s.d_theta], [-2 / 3, -2 / 3])
    s = interpolation_factors(Direction(150, 150))
    assert_allclose([s.d_phi, s.d_theta], [2 / 3, 2 / 3])
    with pytest.raises(SteeringError):
        interpolation_factors(Direction(200, 90))


@given(st.floats(0, 180), angles_el)
def test_interpolation_factors_invertible(az, el):
    s = interpolation_factors(Direction(az, el))
    d = s.direction()
    assert_allclose([d.az, d.el], [az, el], atol=1e-9)


def test_steering_state_validation():
    with pytest.raises(SteeringError):
        SteeringState(1.5, 0)
    with pytest.raises(SteeringError):
        SteeringState(0, np.inf)


def test_monomial_ordering():
    s = SteeringState(0.5, -0.25)
    m = s.monomials(P=2, R=1)
    # r outer (theta powers), p inner (phi powers)
    expected = [1, 0.5, 0.25, -0.25, -0.125, -0.0625]
    assert_allclose(m, expected)


def test_angular_distance_examples():
    assert_allclose(angular_distance(Direction(0, 90), Direction(90, 90)), 90)
    assert_allclose(angular_distance(Direction(10, 0), Direction(200, 0)), 0, atol=1e-12)
    assert_allclose(angular_distance(Direction(0, 0), Direction(0, 180)), 180)


@settings(max_examples=60)
@given(angles_az, angles_el, angles_az, angles_el)
def test_angular_distance_symmetric_bounded(a1, e1, a2, e2):
    a, b = Direction(a1, e1), Direction(a2, e2)
    d = angular_distance(a, b)
    assert 0 <= d <= 180
    assert_allclose(d, angular_distance(b, a), atol=1e-12)


@settings(max_examples=40)
@given(angles_az, angles_el, angles_az, angles_el, angles_az, angles_el)
def test_angular_distance_triangle(a1, e1, a2, e2, a3, e3):
    a, b, c = Direction(a1, e1), Direction(a2, e2), Direction(a3, e3)
    assert angular_distance(a, c) <= angular_distance(a, b) + angular_distance(b, c) + 1e-9


def test_pld_grid_tensor():
    plds = make_pld_grid([30, 150], [30, 150], 30)
    assert len(plds) == 25
    assert (plds[0].az, plds[0].el) == (30, 30)
    assert (plds[1].az, plds[1].el) == (60, 30)
    assert len(make_pld_grid([90, 90], [90, 90], 30)) == 1
    with pytest.raises(ValueError):
        make_pld_grid([30, 150], [30, 150], 7)
    with pytest.raises(ValueError):
        make_pld_grid([150, 30], [30, 150], 30)


def test_cap_array_layout():
    geo = spherical_cap_array(12, 0.09, 75)
    r = np.linalg.norm(geo.positions, axis=1)
    assert_allclose(r, 0.09)
    front = Direction(90, 90).unit
    ang = np.rad2deg(np.arccos(geo.positions @ front / 0.09))
    assert ang.max() <= 75 + 1e-9


def test_array_geometry_validation():
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((2, 2)))
    geo = linear_array(4, 0.05)
    assert geo.n_mics == 4
    assert_allclose(geo.positions[:, 0], [-0.075, -0.025, 0.025, 0.075])
