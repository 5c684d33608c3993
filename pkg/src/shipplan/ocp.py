"""Spatial-domain minimum time and fuel problem as a second-order cone program.

The state is the squared path speed ``b = sigma_dot**2`` and the battery energy
deviation ``dE`` on nodes 0..N; inputs live on control nodes 0..N-1 and the
dynamics use forward differences. Fictive forces (power / sqrt(b)) turn
energy flows into integrals over sigma.
"""

from __future__ import annotations

import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import hydro
from .backends import resolve_backend, solve_standard
from .conic import Affine, ConeProgram, ProgramBuilder
from .ipm import OPTIMAL
from .path import PathSamples
from .powertrain import (
    ShipModels,
    converter_schedule,
    in_intervals,
    steady_power,
)
from .propeller import tightness_condition

CONTROL_NAMES = ("F_D", "F_H", "F_R", "D_R", "y_t", "w", "z", "ntil", "F_c", "F_bat", "F_batd", "F_dEp")


class MissionError(ValueError):
    """Inconsistent mission definition."""


def _check_intervals(intervals, name: str):
    out = []
    for item in intervals:
        a, b = map(float, item)
        if not 0.0 <= a < b <= 1.0:
            raise MissionError(f"{name}: interval ({a}, {b}) must satisfy 0 <= a < b <= 1")
        out.append((a, b))
    out.sort()
    for (a0, b0), (a1, b1) in zip(out, out[1:]):
        if a1 < b0:
            raise MissionError(f"{name}: intervals ({a0}, {b0}) and ({a1}, {b1}) overlap")
    return tuple(out)


@dataclass(frozen=True)
class Mission:
    """Voyage requirements along the path.

    ``v_final=None`` leaves the arrival speed free. Speed limits are
    ``((a, b), v_max)`` pairs over sigma intervals.
    """

    v_init: float
    v_final: float | None = None
    omega_T: float = 1.0
    speed_limits: tuple = ()
    zero_emission_legs: tuple = ()
    battery_only_legs: tuple = ()
    P_aux: float = 0.0
    N: int = 399

    def __post_init__(self):
        if self.v_init < 0 or (self.v_final is not None and self.v_final < 0):
            raise MissionError("boundary speeds must be nonnegative")
        if self.omega_T < 0 or self.P_aux < 0:
            raise MissionError("omega_T and P_aux must be nonnegative")
        if int(self.N) != self.N or self.N < 2:
            raise MissionError("N must be an integer >= 2")
        limits = []
        for item in self.speed_limits:
            (a, b), v = item
            if v <= 0:
                raise MissionError("speed limits must be positive")
            limits.append(((float(a), float(b)), float(v)))
        _check_intervals([iv for iv, _ in limits], "speed_limits")
        object.__setattr__(self, "speed_limits", tuple(sorted(limits)))
        object.__setattr__(self, "zero_emission_legs", _check_intervals(self.zero_emission_legs, "zero_emission_legs"))
        object.__setattr__(self, "battery_only_legs", _check_intervals(self.battery_only_legs, "battery_only_legs"))

    @property
    def converter_off_legs(self) -> tuple:
        return self.zero_emission_legs + self.battery_only_legs


def mission_schedule(path: PathSamples, models: ShipModels, mission: Mission) -> np.ndarray:
    """Converter on-count per control node."""
    if models.conv.k_c is not None:
        k = np.asarray(models.conv.k_c)
        if k.size != path.N:
            raise MissionError(f"converter schedule has {k.size} entries, expected {path.N}")
        return k
    v, p, d = models.vessel, models.prop, models.drv
    return converter_schedule(
        path.sigma[:-1], models.conv, mission.converter_off_legs, mission.speed_limits,
        power_at=lambda vmax: steady_power(vmax, v, p, d, mission.P_aux),
    )


def build_program(
    path: PathSamples,
    models: ShipModels,
    mission: Mission,
    friction_speed=None,
    C_R=None,
) -> ConeProgram:
    """Assemble the discretized problem.

    ``friction_speed`` (per control node, m/s) fixes the speed at which the
    friction coefficient is evaluated; the default is the Taylor reference
    speed. ``C_R`` optionally overrides the residual resistance per node.
    """
    if path.N != mission.N:
        raise MissionError(f"path has {path.N} intervals, mission expects {mission.N}")
    vessel, prop, drv, conv, batt = models.vessel, models.prop, models.drv, models.conv, models.batt
    N = path.N
    ds = path.dsigma
    sp_all = path.sp12
    sp = sp_all[:N]
    rt = np.sqrt(sp)
    th, thp, thpp = path.theta[:N], path.thetap[:N], path.thetapp[:N]
    k_c = mission_schedule(path, models, mission)

    if friction_speed is None:
        friction_speed = np.full(N, drv.v_ref)
    friction_speed = np.maximum(np.broadcast_to(np.asarray(friction_speed, float), (N,)), 0.05)
    C_F = hydro.friction_coefficient(friction_speed, vessel)
    C_R_nodes = np.broadcast_to(vessel.C_R if C_R is None else np.asarray(C_R, float), (N,))
    a_D = 0.5 * vessel.rho * (C_F + C_R_nodes) * vessel.A_s
    k_I = hydro.induced_drag_coefficient(vessel)
    k_H = 0.5 * vessel.rho * vessel.S * vessel.C_L_max
    t1, t2, t3 = prop.thrust_coeffs
    q1, q2, q3 = prop.torque_coeffs
    e1, e2, e3 = prop.energy_coeffs
    kp = prop.k_p
    qT = hydro.thrust_inflow_scale(prop)
    rud = vessel.rudder
    k_R = 0.5 * vessel.rho * rud.lift_slope * np.sin(rud.omega_max) * rud.A_R * rud.k_tm**2
    c_R = hydro.rudder_drag_coefficient(vessel)
    m_s = vessel.mass_matrix[0, 0]
    I_s = vessel.mass_matrix[2, 2]
    tau = vessel.tau
    m_a = vessel.added_mass_per_length

    # scaling references
    v_sc = max(mission.v_init, drv.v_ref, 0.5)
    b_ref_all = v_sc**2 / sp_all
    b_ref = b_ref_all[:N]
    F_sc = max(float(np.mean(a_D)) * v_sc**2, 1e-3)
    n_sc2 = max((F_sc / kp + t3 * v_sc**2) / t1, 1e-3)
    P_sc = max(F_sc * v_sc / drv.eta_tilde, 1e-3)
    E_sc = max(abs(batt.dE_min), batt.dE_max, P_sc)

    pb = ProgramBuilder()
    b = pb.var("b", N + 1, b_ref_all)
    dE = pb.var("dE", N + 1, E_sc)
    F_D = pb.var("F_D", N, F_sc)
    F_H = pb.var("F_H", N, F_sc)
    F_R = pb.var("F_R", N, F_sc)
    D_R = pb.var("D_R", N, F_sc)
    y_t = pb.var("y_t", N, rt / v_sc)
    w = pb.var("w", N, 1.0)
    z = pb.var("z", N, v_sc * np.sqrt(n_sc2))
    ntil = pb.var("ntil", N, n_sc2)
    F_c = pb.var("F_c", N, P_sc * rt / v_sc)
    F_bat = pb.var("F_bat", N, P_sc * rt / v_sc)
    F_batd = pb.var("F_batd", N, P_sc * rt / v_sc)
    F_dEp = pb.var("F_dEp", N, P_sc * rt / v_sc)

    bi = b[:N]
    vsq = bi * sp  # squared speed at control nodes
    T_one = -t3 * vsq - t2 * z + t1 * ntil
    Q_one = -q3 * vsq - q2 * z + q1 * ntil
    T_tot = T_one * kp
    F_P = bi * (vessel.x_T * m_a * thp * rt)
    db = (b[1:] - b[:N]) / ds

    along = T_tot - F_D - D_R
    lateral = F_H + F_P - F_R
    c, s = np.cos(th), np.sin(th)
    pb.eq(along * c - lateral * s - (db * (0.5 * m_s * path.s1p[:N]) + bi * (m_s * path.s1pp[:N])) - tau[0], "dynamics_x")
    pb.eq(along * s + lateral * c - (db * (0.5 * m_s * path.s2p[:N]) + bi * (m_s * path.s2pp[:N])) - tau[1], "dynamics_y")
    pb.eq(F_H * vessel.L_H - F_P * vessel.L_P + F_R * vessel.L_R
          - (db * (0.5 * I_s * thp) + bi * (I_s * thpp)) - tau[2], "dynamics_yaw")
    pb.eq(dE[1:] - dE[:N] + F_bat * ds, "battery_energy")
    pb.eq(dE[:1], "battery_initial")
    if batt.soc_sustaining:
        pb.eq(dE[N:], "battery_terminal")
    pb.eq(b[:1] - mission.v_init**2 / sp_all[0], "speed_initial")
    if mission.v_final is not None:
        pb.eq(b[N:] - mission.v_final**2 / sp_all[N], "speed_final")

    pb.ge(b, "b_nonnegative")
    pb.le(F_H - vsq * k_H, "drift_upper")
    pb.le(-F_H - vsq * k_H, "drift_lower")
    pb.rsoc(F_D - vsq * a_D, vsq / k_I, F_H, "drag")
    inflow = vsq * (1 - prop.f_w) ** 2 + T_one / qT
    pb.le(F_R - inflow * (kp * k_R), "rudder_upper")
    pb.le(-F_R - inflow * (kp * k_R), "rudder_lower")
    pb.rsoc(D_R, inflow * (kp * c_R), F_R, "rudder_drag")
    pb.ge(z, "z_nonnegative")
    pb.rsoc(vsq, ntil, z, "shaft_product")
    pb.rsoc(z, (F_dEp / rt + z * e3 + ntil * e2) / e1, ntil, "propeller_energy")
    one = Affine.constant(N, 1.0)
    pb.rsoc(bi / b_ref, one, w, "time_root")
    pb.rsoc(y_t * np.sqrt(b_ref), w, one, "time_inverse")
    pb.rsoc(F_batd, y_t * (1.0 / batt.loss_coefficient), F_bat, "battery_loss")
    pb.le(F_dEp * (kp / drv.eta_tilde) + y_t * mission.P_aux + F_batd - F_c * k_c - F_bat * batt.eta_dcdc,
          "energy_balance")
    pb.le(ntil - drv.n_p_max**2, "shaft_speed_limit")
    pb.le(Q_one - drv.Q_p_max, "torque_limit")
    taylor = 0.5 * rt / drv.v_ref * (3.0 - vsq / drv.v_ref**2)
    pb.le(F_dEp / drv.eta_tilde - taylor * drv.P_EM_max, "motor_power_limit")
    pb.ge(F_c, "converter_nonnegative")
    on = k_c > 0
    pb.le(F_c - taylor * (conv.P_c_max * on), "converter_power_limit")
    pb.le(F_bat - taylor * batt.P_dis_max, "battery_discharge_limit")
    pb.le(-F_bat - taylor * batt.P_cha_max, "battery_charge_limit")
    pb.le(dE - batt.dE_max, "battery_energy_upper")
    pb.ge(dE - batt.dE_min, "battery_energy_lower")
    limited = np.zeros(N + 1, dtype=bool)
    vmax2 = np.full(N + 1, np.inf)
    for (lo, hi), vmax in mission.speed_limits:
        mask = in_intervals(path.sigma, [(lo, hi)])
        limited |= mask
        vmax2[mask] = np.minimum(vmax2[mask], vmax**2)
    if limited.any():
        sel = np.flatnonzero(limited)
        pb.le(b[sel] * sp_all[sel] - vmax2[sel], "speed_limit")

    pb.minimize(y_t * ((k_c * conv.a_c0 + mission.omega_T) * ds) + F_c * (k_c * conv.a_c1 * ds))
    meta = dict(path=path, models=models, mission=mission, k_c=k_c, C_F=C_F, speed_limited=limited)
    return pb.build(meta)


@dataclass
class TightnessReport:
    """Per-node residuals of the three relaxations that must be tight at the optimum."""

    time_residual: np.ndarray      # |y_t sqrt(b) - 1|
    shaft_residual: np.ndarray     # |z - sqrt(s'12 b ntil)| / max(1, z)
    balance_residual: np.ndarray   # |balance| / largest term
    drag_slack: np.ndarray         # (F_D - bound) / max(1, F_D)
    rudder_drag_slack: np.ndarray
    exception_mask: np.ndarray     # converter off or idle
    battery_dissipation: np.ndarray  # loss exceeds P_aux
    motor_speed_active: np.ndarray
    motor_torque_active: np.ndarray
    propeller_condition: tuple
    full_model: bool
    tol: float

    @property
    def exceptions(self) -> np.ndarray:
        return self.exception_mask

    def max_residuals(self, include_exceptions: bool = False) -> dict:
        keep = np.ones_like(self.exception_mask) if include_exceptions else ~self.exception_mask
        def mx(a):
            a = a[keep]
            return float(a.max()) if a.size else 0.0
        out = {"time": mx(self.time_residual), "balance": mx(self.balance_residual)}
        out["shaft"] = mx(self.shaft_residual) if self.full_model else 0.0
        return out

    @property
    def ok(self) -> bool:
        r = self.max_residuals()
        return r["time"] <= self.tol and r["shaft"] <= self.tol and r["balance"] <= max(self.tol * 0.1, 1e-6)

    def summary(self) -> dict:
        r = self.max_residuals()
        return {
            "max_time_residual": r["time"],
            "max_shaft_residual": r["shaft"],
            "max_balance_residual": r["balance"],
            "max_drag_slack": float(self.drag_slack.max(initial=0.0)),
            "max_rudder_drag_slack": float(self.rudder_drag_slack.max(initial=0.0)),
            "exception_nodes": int(self.exception_mask.sum()),
            "battery_dissipation_nodes": int(self.battery_dissipation.sum()),
            "motor_speed_active_nodes": int(self.motor_speed_active.sum()),
            "motor_torque_active_nodes": int(self.motor_torque_active.sum()),
            "propeller_condition": {"vacuous": self.propeller_condition[0],
                                    "holds": self.propeller_condition[1],
                                    "margin": self.propeller_condition[2]},
            "tight": self.ok,
        }


@dataclass
class PlanSolution:
    status: str
    backend: str
    sigma: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    sp12: np.ndarray
    b: np.ndarray
    dE: np.ndarray
    controls: dict
    k_c: np.ndarray
    objective: float
    fuel: float
    time: float
    time_exact: float
    solve_time: float
    iterations: int
    duals: dict = field(default_factory=dict)
    tightness: TightnessReport | None = None
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def v(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.sp12 * self.b, 0.0))

    @property
    def n_p(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.controls["ntil"], 0.0))


def _unscaled_duals(program: ConeProgram, sf, res) -> dict:
    duals: dict = {}
    if res.status != OPTIMAL:
        return duals
    y = res.y * program.obj_scale / program.eq_scale
    for label, start, count in program.eq_labels:
        duals[label] = y[start:start + count]
    z_raw = sf.transform.T @ res.z
    z_raw = z_raw * program.obj_scale / program.ineq_scale
    for g in program.groups:
        duals[g.label] = z_raw[g.rows] if g.dim > 1 else z_raw[g.rows[:, 0]]
    return duals


def solve(program: ConeProgram, backend: str | None = None, tol: float = 1e-8, verbose: bool = False) -> PlanSolution:
    """Solve a built program and recover physical trajectories."""
    backend = resolve_backend(backend)
    sf = program.standard_form()
    t0 = _time.perf_counter()
    res = solve_standard(sf, backend, tol, verbose)
    elapsed = _time.perf_counter() - t0

    meta = program.meta
    path: PathSamples = meta["path"]
    models: ShipModels = meta["models"]
    mission: Mission = meta["mission"]
    k_c = meta["k_c"]
    N = path.N
    ds = path.dsigma

    if res.status == OPTIMAL:
        get = lambda name: program.physical(res.x, name)
        b = get("b")
        dE = get("dE")
        ctrl = {name: get(name) for name in CONTROL_NAMES}
    else:
        b = np.full(N + 1, np.nan)
        dE = np.full(N + 1, np.nan)
        ctrl = {name: np.full(N, np.nan) for name in CONTROL_NAMES}

    prop, vessel = models.prop, models.vessel
    sp = path.sp12[:N]
    t1, t2, t3 = prop.thrust_coeffs
    q1, q2, q3 = prop.torque_coeffs
    bi = b[:N]
    ctrl["T_p"] = prop.k_p * (-t3 * sp * bi - t2 * ctrl["z"] + t1 * ctrl["ntil"])
    ctrl["Q_p"] = -q3 * sp * bi - q2 * ctrl["z"] + q1 * ctrl["ntil"]
    ctrl["F_P"] = hydro.yaw_damping_force(bi, sp, path.thetap[:N], vessel)
    ctrl["n_p"] = np.sqrt(np.maximum(ctrl["ntil"], 0.0))

    conv = models.conv
    y_t, F_c = ctrl["y_t"], ctrl["F_c"]
    fuel = float(np.sum(k_c * (conv.a_c0 * y_t + conv.a_c1 * F_c)) * ds)
    t_voy = float(np.sum(y_t) * ds)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_exact = float(np.sum(1.0 / np.sqrt(bi)) * ds)
    objective = program.objective(res.x) if res.status == OPTIMAL else float("nan")

    sol = PlanSolution(
        status=res.status, backend=backend, sigma=path.sigma, x=path.s1, y=path.s2, theta=path.theta,
        sp12=path.sp12, b=b, dE=dE, controls=ctrl, k_c=np.asarray(k_c), objective=objective,
        fuel=fuel, time=t_voy, time_exact=t_exact, solve_time=elapsed, iterations=res.iterations,
        duals=_unscaled_duals(program, sf, res), info=dict(res.info),
    )
    sol.info["C_F"] = meta["C_F"]
    if sol.optimal:
        sol.tightness = check_tightness(sol, models, mission)
    return sol


def check_tightness(sol: PlanSolution, models: ShipModels, mission: Mission | None = None, tol: float = 1e-5) -> TightnessReport:
    """Residuals of the relaxed equalities and flags explaining admissible slack."""
    vessel, prop, drv, conv, batt = models.vessel, models.prop, models.drv, models.conv, models.batt
    P_aux = mission.P_aux if mission is not None else 0.0
    N = sol.sigma.size - 1
    c = sol.controls
    sp = sol.sp12[:N]
    bi = sol.b[:N]
    vsq = np.maximum(sp * bi, 0.0)
    y_t, z, ntil = c["y_t"], c["z"], c["ntil"]

    time_res = np.abs(y_t * np.sqrt(np.maximum(bi, 0.0)) - 1.0)
    shaft_res = np.abs(z - np.sqrt(vsq * np.maximum(ntil, 0.0))) / np.maximum(1.0, np.abs(z))
    terms = np.vstack([
        prop.k_p * c["F_dEp"] / drv.eta_tilde, P_aux * y_t, c["F_batd"],
        sol.k_c * c["F_c"], batt.eta_dcdc * c["F_bat"],
    ])
    bal = terms[0] + terms[1] + terms[2] - terms[3] - terms[4]
    bal_res = np.abs(bal) / np.maximum(np.abs(terms).max(axis=0), 1e-300)

    drag_lb = hydro.drag_epigraph_terms(c["F_H"], np.maximum(bi, 1e-12), sp, vessel, C_F=sol.info.get("C_F"))
    drag_slack = np.maximum(c["F_D"] - drag_lb, 0.0) / np.maximum(1.0, np.abs(c["F_D"]))
    T_one = c["T_p"] / prop.k_p
    inflow = hydro.rudder_inflow_sq(T_one, bi, sp, vessel, prop)
    with np.errstate(divide="ignore", invalid="ignore"):
        rd_lb = np.where(c["F_R"] == 0, 0.0, c["F_R"] ** 2 / (prop.k_p * hydro.rudder_drag_coefficient(vessel) * inflow))
    rd_slack = np.maximum(c["D_R"] - rd_lb, 0.0) / np.maximum(1.0, np.abs(c["D_R"]))

    converter_scale = conv.P_c_max * np.sqrt(sp) / max(drv.v_ref, 1e-9)
    exception_mask = (sol.k_c == 0) | (c["F_c"] <= 1e-6 * converter_scale)
    diss = c["F_batd"] > P_aux * y_t * (1 + 1e-9) + 1e-12
    speed_active = ntil >= drv.n_p_max**2 * (1 - 1e-6)
    torque_active = c["Q_p"] >= drv.Q_p_max * (1 - 1e-6)
    return TightnessReport(
        time_residual=time_res, shaft_residual=shaft_res, balance_residual=bal_res,
        drag_slack=drag_slack, rudder_drag_slack=rd_slack, exception_mask=exception_mask,
        battery_dissipation=diss, motor_speed_active=speed_active, motor_torque_active=torque_active,
        propeller_condition=tuple(tightness_condition(prop)), full_model=not prop.reduced, tol=tol,
    )


def plan(
    path: PathSamples,
    models: ShipModels,
    mission: Mission,
    backend: str | None = None,
    tol: float = 1e-8,
    friction_passes: int = 1,
    verbose: bool = False,
) -> PlanSolution:
    """Build and solve, then re-solve with friction evaluated at the planned speeds.

    Each pass replaces the reference-speed friction coefficient by the one at
    the previous solution's node speeds.
    """
    t0 = _time.perf_counter()
    sol = solve(build_program(path, models, mission), backend, tol, verbose)
    for _ in range(friction_passes):
        if not sol.optimal:
            break
        speeds = sol.v[: path.N]
        nxt = solve(build_program(path, models, mission, friction_speed=speeds), backend, tol, verbose)
        nxt.info["previous_objective"] = sol.objective
        sol = nxt
    sol.info["total_time"] = _time.perf_counter() - t0
    return sol


@dataclass(frozen=True)
class ParetoPoint:
    weight: float
    time: float
    fuel: float
    status: str


def _sweep_point(args) -> ParetoPoint:
    path, models, mission, wgt, backend, tol, friction_passes = args
    sol = plan(path, models, replace(mission, omega_T=float(wgt)), backend, tol, friction_passes)
    return ParetoPoint(float(wgt), sol.time, sol.fuel, sol.status)


def pareto_sweep(
    path: PathSamples,
    models: ShipModels,
    mission: Mission,
    weights: Sequence[float],
    backend: str | None = None,
    tol: float = 1e-8,
    friction_passes: int = 1,
    workers: int = 1,
) -> list[ParetoPoint]:
    """One solve per time weight, sorted by voyage time.

    With ``workers > 1`` the solves run in separate processes; results do not
    depend on the worker count.
    """
    backend = resolve_backend(backend)
    jobs = [(path, models, mission, w, backend, tol, friction_passes) for w in weights]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            pts = list(pool.map(_sweep_point, jobs))
    else:
        pts = [_sweep_point(j) for j in jobs]
    return sorted(pts, key=lambda p: (p.time, -p.weight))
