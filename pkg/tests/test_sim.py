from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shipplan.hydro import generalized_forces, physical_forces
from shipplan.ocp import plan
from shipplan.sim import (
    SimState, order_of_accuracy, resimulate_plan, run_schedule, run_zigzag, simulate, steady_shaft_speed, step_rk2,
)

from conftest import straight_path


def kinetic_energy(models, hist):
    M = models.vessel.mass_matrix
    return 0.5 * (M[0, 0] * (hist.xd**2 + hist.yd**2) + M[2, 2] * hist.thetad**2)


def test_rest_is_equilibrium(baseline):
    s0 = SimState(0.0, 1.0, 2.0, 0.3, 0.0, 0.0, 0.0)
    s1, warns = step_rk2(s0, (0.0, 0.0), 0.01, baseline.models)
    np.testing.assert_array_equal(s1.as_array(), s0.as_array())
    assert warns == ()


def test_state_round_trip():
    s = SimState(1.5, 1.0, 2.0, 0.3, 0.4, -0.1, 0.02)
    assert SimState.from_array(1.5, s.as_array()) == s
    assert s.speed == pytest.approx(np.hypot(0.4, 0.1))


def test_steady_running_balances_drag(baseline):
    m = baseline.models
    n = steady_shaft_speed(1.0, m)
    hist = run_schedule(m, SimState(0, 0, 0, 0, 1.0, 0, 0), lambda t: 0.0, n, 0.05, 30.0)
    assert hist.speed[-1] == pytest.approx(1.0, rel=1e-6)
    f = physical_forces(hist.final_state(), (n, 0.0), m.vessel, m.prop)
    assert f.T_p == pytest.approx(f.F_D, rel=1e-6)


def test_spin_up_reaches_steady_speed(baseline):
    m = baseline.models
    n = steady_shaft_speed(1.2, m)
    hist = run_schedule(m, SimState(0, 0, 0, 0, 0.3, 0, 0), lambda t: 0.0, n, 0.05, 400.0)
    assert hist.speed[-1] == pytest.approx(1.2, rel=1e-4)
    assert np.all(np.diff(hist.speed) >= -1e-12)


def test_zero_zigzag_runs_straight(baseline):
    hist = run_zigzag(baseline.models, angle_deg=0.0, trigger_deg=5.0, t_end=20.0)
    np.testing.assert_allclose(hist.theta, 0.0, atol=1e-14)
    np.testing.assert_allclose(hist.y, 0.0, atol=1e-14)


def test_zigzag_20_20(baseline):
    hist = run_zigzag(baseline.models, 20.0, t_end=120.0)
    assert len(hist.switch_times) >= 2
    over = np.abs(hist.overshoots())
    assert np.all(np.isfinite(over))
    assert np.all(over[1:] > np.deg2rad(20.0))
    assert not hist.warnings


def test_mirrored_zigzag(baseline):
    from shipplan.sim import ManeuverScript
    m = baseline.models
    n = steady_shaft_speed(1.0, m)
    s0 = SimState(0, 0, 0, 0, 1.0, 0, 0)
    a = simulate(m, s0, 0.02, 40.0, ManeuverScript(np.deg2rad(20), np.deg2rad(20), n, 1).controller())
    b = simulate(m, s0, 0.02, 40.0, ManeuverScript(np.deg2rad(20), np.deg2rad(20), n, -1).controller())
    np.testing.assert_allclose(b.x, a.x, atol=1e-9)
    np.testing.assert_allclose(b.y, -a.y, atol=1e-9)
    np.testing.assert_allclose(b.theta, -a.theta, atol=1e-12)
    np.testing.assert_allclose(b.rudder, -a.rudder)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(-0.2, 0.2), st.floats(-0.1, 0.1))
def test_coasting_dissipates_energy(baseline, v0, sway, r):
    m = baseline.models
    hist = run_schedule(m, SimState(0, 0, 0, 0, v0, sway, r), lambda t: 0.0, 0.0, 0.05, 20.0)
    ke = kinetic_energy(m, hist)
    assert np.all(np.diff(ke) <= 1e-9 * ke[0])
    assert ke[-1] < ke[0]


def test_second_order_convergence(baseline):
    ratio, errs = order_of_accuracy(baseline.models)
    assert 3.0 <= ratio <= 5.0
    assert errs[1] < errs[0]


def test_turning_equilibrium(baseline):
    m = baseline.models
    n = steady_shaft_speed(1.0, m)
    hist = run_schedule(m, SimState(0, 0, 0, 0, 1.0, 0, 0), lambda t: np.deg2rad(10.0), n, 0.05, 300.0)
    final = hist.final_state()
    assert final.thetad > 0
    f = physical_forces(final, (n, np.deg2rad(10.0)), m.vessel, m.prop)
    v = m.vessel
    terms = np.abs([v.L_H * f.F_H, v.L_P * f.F_P, v.L_R * f.F_R])
    assert abs(generalized_forces(final.theta, f, v)[2]) <= 1e-4 * terms.max()


def _constant_plan(models, v, N=50, length=50.0):
    path = straight_path(length, N)
    n = steady_shaft_speed(v, models)
    sol = SimpleNamespace(
        sigma=path.sigma, sp12=path.sp12, v=np.full(N + 1, v), n_p=np.full(N, n),
        time_exact=length / v,
    )
    return path, sol


def test_constant_speed_resim(baseline):
    path, sol = _constant_plan(baseline.models, 1.1)
    res = resimulate_plan(sol, path, baseline.models, h=0.05)
    assert res.completed
    assert res.rms_relative_deviation <= 1e-3
    assert res.voyage_time == pytest.approx(50.0 / 1.1, rel=1e-3)
    assert res.drift_flags == 0 and res.rudder_flags == 0
    np.testing.assert_allclose(res.F_H, 0.0, atol=1e-9)


def test_resim_sensitivity_to_shaft_speed(small_straight):
    path, models, mission = small_straight
    sol = plan(path, models, mission, "clarabel")
    devs = []
    for k in (1.0, 1.02, 1.05):
        pert = SimpleNamespace(sigma=sol.sigma, sp12=sol.sp12, v=sol.v, n_p=sol.n_p * k, time_exact=sol.time_exact)
        devs.append(resimulate_plan(pert, path, models, h=0.05).rms_relative_deviation)
    assert devs[0] < 0.01
    assert devs[0] < devs[1] < devs[2]


def test_resim_rejects_zero_start(baseline):
    path, sol = _constant_plan(baseline.models, 1.0)
    sol.v = np.zeros_like(sol.v)
    with pytest.raises(ValueError):
        resimulate_plan(sol, path, baseline.models)
