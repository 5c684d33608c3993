import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shipplan.hydro import (
    HullForceSet, RudderModel, drag_constant, drag_epigraph_terms, drift_force_bound, friction_coefficient,
    generalized_forces, induced_drag_coefficient, physical_forces, rudder_drag_coefficient, rudder_drag_epigraph,
    rudder_force_bound, rudder_inflow_sq, yaw_damping_force,
)
from shipplan.sim import SimState


@pytest.fixture(scope="module")
def vessel(baseline):
    return baseline.models.vessel


@pytest.fixture(scope="module")
def prop(baseline):
    return baseline.models.prop


def test_friction_hand_values(vessel):
    # Rn = v L / nu with L = 4.002, nu = 1e-6
    v6 = 1e6 * vessel.nu / vessel.L
    assert friction_coefficient(v6, vessel) == pytest.approx(0.075 / 16, rel=1e-12)
    v4 = 1e4 * vessel.nu / vessel.L
    assert friction_coefficient(v4, vessel) == pytest.approx(0.075 / 4, rel=1e-12)
    assert 1e-3 < friction_coefficient(1.53, vessel) < 1e-2
    assert friction_coefficient(1.0, vessel) == pytest.approx(0.003540916935227795, rel=1e-12)


def test_friction_domain_errors(vessel):
    with pytest.raises(ValueError):
        friction_coefficient(0.0, vessel)
    with pytest.raises(ValueError):
        friction_coefficient(50 * vessel.nu / vessel.L, vessel)


def test_drift_bound(vessel):
    assert drift_force_bound(0.0, 3.0, vessel) == 0.0
    assert drift_force_bound(2.0, 3.0, vessel) == pytest.approx(2 * drift_force_bound(1.0, 3.0, vessel))
    assert vessel.a_L1 == 0.42 and vessel.S == 1.18
    assert drift_force_bound(0.25, 4.0, vessel) == pytest.approx(0.5 * 997 * 1.18 * vessel.C_L_max)


def test_induced_drag_constant(vessel):
    assert induced_drag_coefficient(vessel) == pytest.approx(5.3600096017909e-05, rel=1e-10)


def test_drag_epigraph_scaling(vessel):
    base = drag_epigraph_terms(0.0, 1.0, 1.0, vessel, C_F=0.004)
    assert base == pytest.approx(drag_constant(0.004, vessel))
    d1 = drag_epigraph_terms(3.0, 1.0, 1.0, vessel, C_F=0.004) - base
    d2 = drag_epigraph_terms(6.0, 1.0, 1.0, vessel, C_F=0.004) - base
    assert d2 == pytest.approx(4 * d1)
    with pytest.raises(ValueError):
        drag_epigraph_terms(1.0, 0.0, 1.0, vessel)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(-0.2, 0.2), st.floats(1.0, 1e4))
def test_drag_epigraph_equals_physical_drag(vessel, v, beta, sp12):
    # planner form at b = v^2/sp12 against the drag formula written in terms of v and the drift angle
    F_H = 0.5 * vessel.rho * v**2 * vessel.S * vessel.a_L1 * beta
    C_F = 0.075 / (np.log10(v * vessel.L / vessel.nu) - 2) ** 2
    C_D = C_F + vessel.C_R + (vessel.a_L1 * beta) ** 2 / (np.pi * vessel.Omega)
    physical = 0.5 * vessel.rho * v**2 * vessel.A_s * C_D
    planner = drag_epigraph_terms(F_H, v**2 / sp12, sp12, vessel)
    assert planner == pytest.approx(physical, rel=1e-10)


def test_added_mass_and_yaw_damping(vessel):
    assert vessel.added_mass_per_length == pytest.approx(46.87132617485052, rel=1e-12)
    assert yaw_damping_force(1.0, 2.0, 0.0, vessel) == 0.0
    assert yaw_damping_force(1.0, 2.0, -0.3, vessel) == pytest.approx(-yaw_damping_force(1.0, 2.0, 0.3, vessel))
    assert yaw_damping_force(2.0, 2.0, 0.3, vessel) == pytest.approx(2 * yaw_damping_force(1.0, 2.0, 0.3, vessel))


def test_rudder_geometry(vessel):
    r = vessel.rudder
    assert r.Lambda == pytest.approx(0.124**2 / 0.012, rel=1e-9)
    assert r.Lambda == pytest.approx(1.281, abs=5e-4)
    assert r.lift_slope == pytest.approx(1.7058075730640552, rel=1e-12)
    # hand value quoted to three decimals; the exact expression is 1.7058
    assert r.lift_slope == pytest.approx(1.703, rel=3e-3)


def test_rudder_bound(vessel, prop):
    assert rudder_force_bound(0.0, 0.0, 1.0, vessel, prop) == 0.0
    T = np.linspace(0, 20, 11)
    assert np.all(np.diff(rudder_force_bound(T, 1.0, 1.0, vessel, prop)) > 0)


def test_rudder_drag_epigraph(vessel, prop):
    assert rudder_drag_epigraph(0.0, 1.0, 1.0, 1.0, vessel, prop) == 0.0
    d1 = rudder_drag_epigraph(1.0, 1.0, 1.0, 1.0, vessel, prop)
    assert rudder_drag_epigraph(2.0, 1.0, 1.0, 1.0, vessel, prop) == pytest.approx(4 * d1)
    with pytest.raises(ValueError):
        rudder_drag_epigraph(1.0, 0.0, 0.0, 1.0, vessel, prop)
    r = vessel.rudder
    expected = 2.2 / (r.A_R * np.pi * r.Lambda * vessel.rho**2 * r.k_tm**2 * rudder_inflow_sq(1.0, 1.0, 1.0, vessel, prop))
    assert d1 == pytest.approx(expected, rel=1e-12)


def test_rudder_drag_rho_switch(vessel):
    from dataclasses import replace
    single = replace(vessel, rudder_drag_rho_power=1)
    assert rudder_drag_coefficient(vessel) == pytest.approx(vessel.rho * rudder_drag_coefficient(single))
    with pytest.raises(ValueError):
        replace(vessel, rudder_drag_rho_power=3)


def test_model_validation(vessel):
    from dataclasses import replace
    with pytest.raises(ValueError):
        replace(vessel, m=0.0)
    with pytest.raises(ValueError):
        RudderModel(0.012, 0.124, k_tm=1.5)
    with pytest.raises(ValueError):
        RudderModel(0.012, 0.124, omega_max=np.deg2rad(25))
    assert vessel.x_T == pytest.approx(vessel.L / 2)


def test_straight_running_forces(vessel, prop):
    s = SimState(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    f = physical_forces(s, (10.0, 0.0), vessel, prop)
    assert f.F_H == 0.0 and f.F_R == 0.0 and f.F_P == 0.0 and f.D_R == 0.0
    assert f.F_D == pytest.approx(drag_constant(friction_coefficient(1.0, vessel), vessel))
    assert f.warnings == ()


def test_physical_drag_matches_epigraph(vessel, prop):
    # vessel heading 0 while moving with a drift angle of 0.1 rad
    v, beta = 1.2, 0.1
    s = SimState(0.0, 0.0, 0.0, 0.0, v * np.cos(beta), -v * np.sin(beta), 0.0)
    f = physical_forces(s, (10.0, 0.0), vessel, prop)
    assert f.F_H > 0
    assert f.F_D == pytest.approx(float(drag_epigraph_terms(f.F_H, v**2, 1.0, vessel)), rel=1e-12)


def test_physical_rudder_drag_matches_epigraph(vessel, prop):
    s = SimState(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    f = physical_forces(s, (12.0, 0.2), vessel, prop)
    T_one = f.T_p / prop.k_p
    per_rudder = rudder_drag_epigraph(f.F_R / prop.k_p, T_one, 1.0, 1.0, vessel, prop)
    assert f.D_R == pytest.approx(prop.k_p * float(per_rudder), rel=1e-10)


def test_unloaded_rudder_inflow(vessel, prop):
    # zero thrust leaves the wake-reduced ship speed as rudder inflow
    assert rudder_inflow_sq(0.0, 4.0, 1.0, vessel, prop) == pytest.approx((1 - prop.f_w) ** 2 * 4.0)


def test_clamping_warnings(vessel, prop):
    s = SimState(0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0)
    f = physical_forces(s, (10.0, 0.5), vessel, prop)
    assert "drift angle beyond beta_max" in f.warnings
    assert "rudder angle beyond omega_max" in f.warnings


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(0, 20))
def test_mirror_symmetry(vessel, prop, u, v, r, omega, n):
    # reflect about the x-axis: y, theta and their rates change sign
    a = physical_forces(SimState(0, 0, 0, 0.0, u, v, r), (n, omega), vessel, prop)
    b = physical_forces(SimState(0, 0, 0, 0.0, u, -v, -r), (n, -omega), vessel, prop)
    assert b.T_p == pytest.approx(a.T_p) and b.F_D == pytest.approx(a.F_D) and b.D_R == pytest.approx(a.D_R)
    for name in ("F_H", "F_P", "F_R"):
        assert getattr(b, name) == pytest.approx(-getattr(a, name), abs=1e-12)


def test_yaw_damping_opposes_turn(vessel, prop):
    s = SimState(0, 0, 0, 0.0, 1.0, 0.0, 0.2)
    f = physical_forces(s, (10.0, 0.0), vessel, prop)
    moment = generalized_forces(0.0, f, vessel)[2]
    assert moment < 0
    f2 = HullForceSet(0, 0, 0, 0, 0, 0)
    np.testing.assert_array_equal(generalized_forces(0.3, f2, vessel), 0.0)
