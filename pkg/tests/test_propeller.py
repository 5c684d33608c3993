import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shipplan.propeller import (
    FitError, OpenWaterCurve, PropellerModel, WageningenTerms, avg_relative_error, energy_input_epigraph,
    eval_wageningen, fit_poly2, open_water_efficiency, physical_thrust, physical_torque, read_wageningen_csv,
    reduced_energy_input, shaft_speed_for_thrust, tightness_condition, thrust, torque, write_wageningen_csv,
)

RHO = 997.0


def reference_prop(**kw):
    base = dict(D_p=0.173, f_w=0.2, a_T0=0.3, a_T2=0.35, a_Q0=0.041, a_Q2=0.041, k_p=2, rho=RHO)
    base.update(kw)
    return PropellerModel(**base)


def full_prop():
    return reference_prop(a_T1=0.12, a_Q1=0.02)


def test_reference_coefficients(baseline):
    p = baseline.models.prop
    assert (p.a_T0, p.a_T2, p.a_Q0, p.a_Q2, p.k_p) == (0.3, 0.35, 0.041, 0.041, 2)
    assert p.reduced


def test_derived_coefficients_closed_form():
    p = full_prop()
    D, w = 0.173, 0.8
    t1, t2, t3 = p.thrust_coeffs
    q1, q2, q3 = p.torque_coeffs
    e1, e2, e3 = p.energy_coeffs
    np.testing.assert_allclose([t1, t2, t3], [0.3 * RHO * D**4, 0.12 * RHO * D**3 * w, 0.35 * RHO * D**2 * w**2], rtol=1e-12)
    np.testing.assert_allclose([q1, q2, q3], [0.041 * RHO * D**5, 0.02 * RHO * D**4 * w, 0.041 * RHO * D**3 * w**2], rtol=1e-12)
    np.testing.assert_allclose([e1, e2, e3], 2 * np.pi * np.array([q1, q2, q3]), rtol=1e-12)
    # frozen values for the reference set, computed by hand
    t1r, _, t3r = reference_prop().thrust_coeffs
    assert t1r == pytest.approx(0.2679173417630999, rel=1e-12)
    assert t3r == pytest.approx(6.683983712000001, rel=1e-12)


def test_reduced_flag():
    assert reference_prop().reduced
    assert not full_prop().reduced
    assert not reference_prop(a_Q1=0.01).reduced


def test_bollard_pull():
    p = reference_prop()
    ntil = 25.0
    assert thrust(0.0, 0.0, ntil, 1.0, p) == pytest.approx(0.3 * RHO * 0.173**4 * ntil)
    assert torque(0.0, 0.0, ntil, 1.0, p) == pytest.approx(0.041 * RHO * 0.173**5 * ntil)


def test_reduced_model_ignores_z():
    p = reference_prop()
    assert thrust(1.0, 0.0, 9.0, 2.0, p) == thrust(1.0, 123.0, 9.0, 2.0, p)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 3.0), st.one_of(st.just(0.0), st.floats(0.1, 30.0)), st.floats(1.0, 1e4))
def test_affine_forms_match_physical(v, n, sp12):
    # substitution oracle: b = v^2/sp12, ntil = n^2, z = v n
    p = full_prop()
    b = v**2 / sp12
    T_aff = thrust(b, v * n, n**2, sp12, p)
    Q_aff = torque(b, v * n, n**2, sp12, p)
    J = (1 - p.f_w) * v / (n * p.D_p) if n > 0 else np.inf
    if n > 0:
        T_phys = RHO * p.D_p**4 * n**2 * p.K_T(J)
        Q_phys = RHO * p.D_p**5 * n**2 * p.K_Q(J)
    else:
        T_phys = physical_thrust(v, 0.0, p)
        Q_phys = physical_torque(v, 0.0, p)
    scale = 1 + abs(T_phys)
    assert T_aff == pytest.approx(T_phys, abs=1e-10 * scale)
    assert Q_aff == pytest.approx(Q_phys, abs=1e-10 * (1 + abs(Q_phys)))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.1, 30.0), st.floats(1.0, 1e4))
def test_energy_epigraph_tight_value_is_shaft_power(v, n, sp12):
    p = full_prop()
    b = v**2 / sp12
    z = np.sqrt(sp12 * b * n**2)
    F = energy_input_epigraph(b, z, n**2, sp12, p)
    power = 2 * np.pi * physical_torque(v, n, p) * n
    assert F == pytest.approx(power / np.sqrt(b), rel=1e-9, abs=1e-9)
    r = reference_prop()
    assert reduced_energy_input(n**2, b, sp12, r) == pytest.approx(
        2 * np.pi * physical_torque(v, n, r) * n / np.sqrt(b), rel=1e-9, abs=1e-9)


def test_energy_epigraph_idle_propeller():
    assert reduced_energy_input(0.0, 1.0, 4.0, reference_prop()) == 0.0
    assert energy_input_epigraph(1.0, 0.0, 0.0, 4.0, full_prop()) == 0.0
    with pytest.raises(ValueError):
        energy_input_epigraph(1.0, 0.0, 4.0, 4.0, full_prop())


@settings(max_examples=100, deadline=None)
@given(st.floats(-5.0, 200.0), st.floats(0.0, 3.0))
def test_shaft_speed_inverts_thrust(T, v):
    p = full_prop()
    n = float(shaft_speed_for_thrust(T, v, p))
    if np.isnan(n):
        # no nonnegative root: thrust at n = 0 already exceeds the request
        assert physical_thrust(v, 0.0, p) > T - 1e-9
    else:
        assert n >= 0
        assert physical_thrust(v, n, p) == pytest.approx(T, abs=1e-8 * (1 + abs(T)))


def test_tightness_condition():
    assert tightness_condition(reference_prop()).vacuous
    # a_Q1 a_T0/(a_Q0 a_T1) = 3 and a_Q2 a_T0^2/(a_Q0 a_T1^2) = 1
    p = PropellerModel(D_p=0.2, f_w=0.1, a_T0=1.0, a_T1=1.0, a_T2=0.1, a_Q0=1.0, a_Q1=3.0, a_Q2=1.0)
    chk = tightness_condition(p)
    assert not chk.vacuous and chk.holds and chk.margin == pytest.approx(1.0)
    q = PropellerModel(D_p=0.2, f_w=0.1, a_T0=1.0, a_T1=1.0, a_T2=0.1, a_Q0=1.0, a_Q1=0.5, a_Q2=1.0)
    assert not tightness_condition(q).holds and tightness_condition(q).margin < 0


def test_invalid_models():
    with pytest.raises(ValueError):
        reference_prop(a_T0=0.0)
    with pytest.raises(ValueError):
        reference_prop(a_T2=-0.1)
    with pytest.raises(ValueError):
        reference_prop(f_w=1.0)


# open-water data -----------------------------------------------------------

def _terms(thrust_rows, torque_rows=((0.02, 0, 0, 0, 0),), Z=4, ae=0.55, pd=1.0):
    return WageningenTerms(np.array(thrust_rows, float), np.array(torque_rows, float), Z, ae, pd)


def nested_loop_eval(terms, J):
    out = []
    for rows in (terms.thrust, terms.torque):
        total = 0.0
        for C, S, t, u, v in rows:
            total += C * J**S * terms.P_D**t * terms.AE_A0**u * terms.Z**v
        out.append(total)
    return tuple(out)


def test_wageningen_simple_cases():
    kt, _ = eval_wageningen(_terms([(0.3, 0, 0, 0, 0)]), np.array([0.0, 0.7, 1.3]))
    np.testing.assert_allclose(kt, 0.3)
    kt, _ = eval_wageningen(_terms([(0.3, 0, 0, 0, 0), (-0.3, 2, 0, 0, 0)]), 1.0)
    assert kt == pytest.approx(0.0, abs=1e-15)


def test_wageningen_against_nested_loop(synthetic_terms):
    for p in synthetic_terms[:10]:
        for J in (0.0, 0.31, 0.77):
            kt, kq = eval_wageningen(p, J)
            ref = nested_loop_eval(p, J)
            assert kt == pytest.approx(ref[0], rel=1e-12, abs=1e-15)
            assert kq == pytest.approx(ref[1], rel=1e-12, abs=1e-15)


@pytest.fixture(scope="module")
def synthetic_terms():
    from importlib import resources
    path = resources.files("shipplan") / "data" / "synthetic_wageningen.csv"
    return read_wageningen_csv(str(path))


def test_term_file_round_trip(tmp_path, synthetic_terms):
    out = tmp_path / "terms.csv"
    write_wageningen_csv(out, synthetic_terms[:3])
    again = read_wageningen_csv(out)
    assert len(again) == 3
    for a, b in zip(again, synthetic_terms[:3]):
        np.testing.assert_array_equal(a.thrust, b.thrust)
        assert (a.Z, a.AE_A0, a.P_D, a.name) == (b.Z, b.AE_A0, b.P_D, b.name)


def test_term_file_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("T,0.1,0,0,0,0\n")
    with pytest.raises(ValueError, match="before any geometry"):
        read_wageningen_csv(bad)
    bad.write_text("# Z=4, AE_A0=0.5\nT,0.1,0,0,0,0\n")
    with pytest.raises(ValueError, match="missing"):
        read_wageningen_csv(bad)
    bad.write_text("# Z=4, AE_A0=0.5, P_D=1\nT,0.1,0,0,0,0\n")
    with pytest.raises(ValueError, match="lacks"):
        read_wageningen_csv(bad)


def test_fit_recovers_reference_coefficients():
    model, rep = fit_poly2(OpenWaterCurve.from_model(reference_prop()), D_p=0.173, f_w=0.2)
    np.testing.assert_allclose([model.a_T0, model.a_T1, model.a_T2], [0.3, 0.0, 0.35], atol=1e-12)
    np.testing.assert_allclose([model.a_Q0, model.a_Q1, model.a_Q2], [0.041, 0.0, 0.041], atol=1e-12)
    assert rep.poly2["K_T"] < 1e-10 and rep.poly2["K_Q"] < 1e-10


def test_fit_constant_curve():
    J = np.linspace(0, 1, 21)
    model, rep = fit_poly2(OpenWaterCurve(J, np.full_like(J, 0.2), np.full_like(J, 0.03)))
    np.testing.assert_allclose([model.a_T0, model.a_T1, model.a_T2], [0.2, 0, 0], atol=1e-12)
    assert rep.poly2["K_T"] < 1e-12


def test_fit_cubic_curve_ordering():
    J = np.linspace(0, 0.9, 101)
    kt = 0.45 - 0.2 * J - 0.15 * J**2 - 0.12 * J**3
    kq = 0.05 - 0.02 * J - 0.01 * J**2 - 0.008 * J**3
    _, rep = fit_poly2(OpenWaterCurve(J, kt, kq))
    assert rep.poly3["K_T"] < 1e-12
    assert 0 < rep.poly2["K_T"] <= rep.linear["K_T"]


def test_fit_linear_zero_flag():
    J = np.linspace(0, 0.9, 51)
    model, _ = fit_poly2(OpenWaterCurve(J, 0.4 - 0.2 * J - 0.1 * J**2, 0.05 - 0.01 * J - 0.02 * J**2), True)
    assert model.a_T1 == 0.0 and model.a_Q1 == 0.0 and model.reduced


def test_fit_rejects_nonpositive_intercept():
    J = np.linspace(0, 1, 11)
    with pytest.raises(FitError):
        fit_poly2(OpenWaterCurve(J, -0.1 - J, 0.05 - 0.01 * J))


def test_fit_design_weighting_improves_local_error():
    J = np.linspace(0, 0.9, 101)
    kt = 0.45 - 0.2 * J - 0.15 * J**2 - 0.3 * J**3
    kq = 0.05 - 0.02 * J - 0.01 * J**2 - 0.01 * J**3
    curve = OpenWaterCurve(J, kt, kq)
    plain, _ = fit_poly2(curve)
    local, _ = fit_poly2(curve, J_design=0.6, weight_width=0.05)
    at = np.abs(J - 0.6) < 0.05
    assert np.abs(local.K_T(J[at]) - kt[at]).max() < np.abs(plain.K_T(J[at]) - kt[at]).max()


def test_synthetic_file_error_ordering(synthetic_terms):
    assert len(synthetic_terms) >= 10
    for p in synthetic_terms:
        _, rep = fit_poly2(OpenWaterCurve.from_terms(p))
        assert rep.poly3["K_T"] <= rep.poly2["K_T"] <= rep.linear["K_T"], p.name


def test_open_water_curve_validation():
    with pytest.raises(ValueError):
        OpenWaterCurve(np.array([0.0, 0.5]), np.ones(2), np.ones(2))
    with pytest.raises(ValueError):
        OpenWaterCurve(np.array([0.0, 0.5, 0.4]), np.ones(3), np.ones(3))


def test_avg_relative_error():
    assert avg_relative_error([1.1, 2.2], [1.0, 2.0]) == pytest.approx(0.1)
    assert avg_relative_error([1.0, 5.0], [1.0, 0.0]) == 0.0


def test_open_water_efficiency_of_fit_below_one(synthetic_terms):
    for p in synthetic_terms:
        curve = OpenWaterCurve.from_terms(p)
        model, _ = fit_poly2(curve)
        kq = model.K_Q(curve.J)
        eta = open_water_efficiency(curve.J, model.K_T(curve.J), kq)
        assert np.all(eta[kq > 0] <= 1.0), p.name
