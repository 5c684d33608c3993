import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shipplan.path import (
    PathError, PathSpec, bezier_derivative, bezier_eval, path_point, random_control_points, sample_path,
)


def de_casteljau(points, t):
    p = np.array(points, dtype=float)
    while len(p) > 1:
        p = (1 - t) * p[:-1] + t * p[1:]
    return p[0]


control_sets = st.lists(
    st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=2, max_size=12
).filter(lambda pts: np.ptp(np.array(pts), axis=0).max() > 1e-3)


@settings(max_examples=60, deadline=None)
@given(control_sets, st.floats(0.0, 1.0))
def test_bezier_eval_matches_de_casteljau(pts, t):
    spec = PathSpec(np.array(pts))
    np.testing.assert_allclose(bezier_eval(spec, t), de_casteljau(pts, t), atol=1e-8, rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(control_sets, st.floats(0.05, 0.95))
def test_first_derivative_matches_central_difference(pts, t):
    spec = PathSpec(np.array(pts))
    h = 1e-6
    fd = (de_casteljau(pts, t + h) - de_casteljau(pts, t - h)) / (2 * h)
    scale = max(1.0, np.abs(np.array(pts)).max() * len(pts))
    np.testing.assert_allclose(bezier_derivative(spec, 1, t), fd, atol=1e-5 * scale)


def test_endpoint_interpolation_and_tangents():
    pts = np.array([[0, 0], [1, 2], [3, 3], [4, 0]], dtype=float)
    spec = PathSpec(pts)
    np.testing.assert_allclose(bezier_eval(spec, 0.0), pts[0])
    np.testing.assert_allclose(bezier_eval(spec, 1.0), pts[-1])
    # end tangents are n (P1 - P0) and n (Pn - Pn-1)
    np.testing.assert_allclose(bezier_derivative(spec, 1, 0.0), 3 * (pts[1] - pts[0]))
    np.testing.assert_allclose(bezier_derivative(spec, 1, 1.0), 3 * (pts[-1] - pts[-2]))


def test_orientation_derivatives_closed_form():
    # s = (2 sigma - sigma^2, sigma^2): theta = atan2(sigma, 1 - sigma)
    spec = PathSpec(np.array([[0, 0], [1, 0], [1, 1]], dtype=float))
    ps = sample_path(spec, 10)
    s = ps.sigma
    den = (1 - s) ** 2 + s**2
    np.testing.assert_allclose(ps.theta, np.arctan2(s, 1 - s), atol=1e-12)
    np.testing.assert_allclose(ps.thetap, 1 / den, rtol=1e-12)
    np.testing.assert_allclose(ps.thetapp, (2 - 4 * s) / den**2, atol=1e-12)
    np.testing.assert_allclose(ps.sp12, (2 - 2 * s) ** 2 + (2 * s) ** 2, rtol=1e-12)


def test_straight_line_has_no_curvature():
    spec = PathSpec(np.column_stack([np.linspace(0, 100, 6), np.zeros(6)]))
    ps = sample_path(spec, 20)
    np.testing.assert_allclose(ps.sp12, 100.0**2)
    assert np.all(ps.theta == 0) and np.all(ps.thetap == 0) and np.all(ps.thetapp == 0)
    np.testing.assert_allclose(ps.s1pp, 0.0, atol=1e-9)


def test_sample_shapes_and_unwrapped_heading():
    # a loop turning through more than pi must not jump by 2 pi
    spec = PathSpec(np.array([[0, 0], [10, 0], [10, 10], [0, 10], [-5, 0], [0, -8]], dtype=float))
    ps = sample_path(spec, 200)
    assert ps.N == 200 and ps.sigma.size == 201
    assert np.isclose(ps.dsigma, 1 / 200)
    assert np.abs(np.diff(ps.theta)).max() < 0.5


def test_theta_derivatives_consistent_with_sampled_heading():
    spec = PathSpec(random_control_points(2, 40))
    ps = sample_path(spec, 4000)
    dth = np.gradient(ps.theta, ps.sigma)
    np.testing.assert_allclose(dth[5:-5], ps.thetap[5:-5], atol=2e-3 * np.abs(ps.thetap).max())


def test_degenerate_node_reported():
    # P0 == P1 makes the tangent vanish at sigma = 0
    spec = PathSpec(np.array([[0, 0], [0, 0], [1, 1], [2, 0], [3, 0]], dtype=float))
    with pytest.raises(PathError, match="node 0"):
        sample_path(spec, 10)


def test_invalid_specs():
    with pytest.raises(PathError):
        PathSpec(np.zeros((1, 2)))
    with pytest.raises(PathError):
        PathSpec(np.zeros((4, 2)))
    with pytest.raises(PathError):
        PathSpec(np.array([[0, 0], [np.nan, 1]]))
    with pytest.raises(PathError):
        PathSpec(np.array([[0, 0], [1, 1], [2, 2]])).require_smooth()
    with pytest.raises(PathError):
        bezier_eval(PathSpec(np.array([[0, 0], [1, 1]])), 1.5)
    with pytest.raises(PathError):
        sample_path(PathSpec(np.array([[0, 0], [1, 1]])), 1)


def test_mirrored_samples():
    ps = sample_path(PathSpec(random_control_points(5, 10)), 50)
    mp = ps.mirrored()
    np.testing.assert_allclose(mp.s2, -ps.s2)
    np.testing.assert_allclose(mp.theta, -ps.theta)
    np.testing.assert_allclose(mp.thetap, -ps.thetap)
    np.testing.assert_allclose(mp.sp12, ps.sp12)


def test_random_control_points_reproducible():
    a = random_control_points(7, 40)
    b = random_control_points(7, 40)
    assert a.shape == (40, 2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, random_control_points(8, 40))


def test_path_point_matches_samples():
    spec = PathSpec(random_control_points(3, 12))
    ps = sample_path(spec, 10)
    p, d1, d2, theta, tp, tpp = path_point(spec, 0.3)
    np.testing.assert_allclose(p, [ps.s1[3], ps.s2[3]])
    np.testing.assert_allclose(d1, [ps.s1p[3], ps.s2p[3]])
    assert np.isclose(tp, ps.thetap[3]) and np.isclose(tpp, ps.thetapp[3])
    assert np.isclose(np.angle(np.exp(1j * (theta - ps.theta[3]))), 0.0, atol=1e-12)


def test_baseline_path_geometry(baseline_path):
    # random 40-point walk: gently curved, no cusps
    assert baseline_path.N == 399
    assert baseline_path.sp12.min() > 1e3
    radius = np.sqrt(baseline_path.sp12) / np.abs(baseline_path.thetap)
    assert radius.min() > 20.0
