"""Time-domain simulation of the nonconvex ship model.

Two integrators share one explicit midpoint (RK2) step:

* free manoeuvres such as the zig-zag test, integrating the planar rigid-body
  equations M q'' = R(theta) u - tau with commanded shaft speed and rudder;
* path-constrained re-simulation of a plan, integrating the path coordinate
  and recovering the lateral forces (and from them drift and rudder angle)
  needed to stay on the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import hydro
from .path import PathSamples, PathSpec, sample_path
from .powertrain import ShipModels
from .propeller import shaft_speed_for_thrust


@dataclass(frozen=True)
class SimState:
    """Pose and velocity in the global frame at time t."""

    t: float
    x: float
    y: float
    theta: float
    xd: float
    yd: float
    thetad: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.xd, self.yd, self.thetad])

    @classmethod
    def from_array(cls, t: float, a) -> "SimState":
        return cls(float(t), *map(float, a))

    @property
    def speed(self) -> float:
        return float(np.hypot(self.xd, self.yd))


def _rhs(state: SimState, controls, models: ShipModels) -> tuple[np.ndarray, tuple]:
    vessel, prop = models.vessel, models.prop
    f = hydro.physical_forces(state, controls, vessel, prop)
    acc = (hydro.generalized_forces(state.theta, f, vessel) - np.asarray(vessel.tau)) / np.diag(vessel.mass_matrix)
    return np.concatenate([[state.xd, state.yd, state.thetad], acc]), f.warnings


def step_rk2(state: SimState, controls, h: float, models: ShipModels) -> tuple[SimState, tuple]:
    """One explicit midpoint step with controls held over the step.

    Returns the new state and the model warnings raised at either stage.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    q = state.as_array()
    k1, w1 = _rhs(state, controls, models)
    mid = SimState.from_array(state.t + h / 2, q + h / 2 * k1)
    k2, w2 = _rhs(mid, controls, models)
    return SimState.from_array(state.t + h, q + h * k2), tuple(dict.fromkeys(w1 + w2))


@dataclass
class SimHistory:
    """Sampled time history of a free manoeuvre."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    xd: np.ndarray
    yd: np.ndarray
    thetad: np.ndarray
    rudder: np.ndarray
    n_p: np.ndarray
    warnings: dict = field(default_factory=dict)
    switch_times: list = field(default_factory=list)

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.xd, self.yd)

    def final_state(self) -> SimState:
        return SimState(float(self.t[-1]), float(self.x[-1]), float(self.y[-1]), float(self.theta[-1]),
                        float(self.xd[-1]), float(self.yd[-1]), float(self.thetad[-1]))

    def overshoots(self) -> np.ndarray:
        """Heading extrema (rad) between consecutive rudder switches."""
        out = []
        bounds = list(self.switch_times) + [self.t[-1]]
        for a, b in zip(bounds[:-1], bounds[1:]):
            seg = self.theta[(self.t >= a) & (self.t <= b)]
            if seg.size:
                out.append(seg[np.argmax(np.abs(seg))])
        return np.asarray(out)


def steady_shaft_speed(v: float, models: ShipModels) -> float:
    """Shaft speed holding speed v on a straight course."""
    vessel, prop = models.vessel, models.prop
    drag = float(hydro.drag_constant(hydro.friction_coefficient(v, vessel), vessel)) * v**2
    return float(shaft_speed_for_thrust(drag / prop.k_p, v, prop))


def simulate(
    models: ShipModels,
    state0: SimState,
    h: float,
    t_end: float,
    controller: Callable[[SimState, float], tuple[float, float]],
) -> SimHistory:
    """Fixed-step integration; ``controller(state, omega_prev)`` returns (n_p, omega).

    The controller is queried at step boundaries only.
    """
    steps = int(round((t_end - state0.t) / h))
    if steps < 1:
        raise ValueError("t_end must exceed the initial time by at least one step")
    rec = np.empty((steps + 1, 9))
    state = state0
    omega = 0.0
    warnings: dict = {}
    switches = []
    n_p = float("nan")
    for k in range(steps + 1):
        n_p, new_omega = controller(state, omega)
        if k > 0 and new_omega != omega:
            switches.append(state.t)
        omega = new_omega
        rec[k] = (state.t, *state.as_array(), omega, n_p)
        if k == steps:
            break
        state, w = step_rk2(state, (n_p, omega), h, models)
        state = replace(state, t=state0.t + (k + 1) * h)
        for msg in w:
            warnings[msg] = warnings.get(msg, 0) + 1
    return SimHistory(*rec.T, warnings=warnings, switch_times=switches)


@dataclass(frozen=True)
class ManeuverScript:
    """Zig-zag manoeuvre: rudder +-angle, reversed when the heading passes +-trigger.

    Angles in radians; the shaft speed is held at ``n_p`` (rev/s).
    """

    rudder_angle: float
    heading_trigger: float
    n_p: float
    first_sign: int = 1

    def controller(self, theta0: float = 0.0):
        sign = [self.first_sign]

        def ctrl(state: SimState, omega_prev: float):
            dpsi = state.theta - theta0
            if sign[0] > 0 and dpsi >= self.heading_trigger:
                sign[0] = -1
            elif sign[0] < 0 and dpsi <= -self.heading_trigger:
                sign[0] = 1
            return self.n_p, sign[0] * self.rudder_angle

        return ctrl


def run_zigzag(
    models: ShipModels,
    angle_deg: float = 20.0,
    trigger_deg: float | None = None,
    v0: float = 1.0,
    h: float = 0.01,
    t_end: float = 120.0,
    n_p: float | None = None,
) -> SimHistory:
    """Zig-zag test from straight steady running at speed v0.

    Positive rudder angles turn the vessel to port (positive yaw).
    """
    if n_p is None:
        n_p = steady_shaft_speed(v0, models)
    trig = angle_deg if trigger_deg is None else trigger_deg
    script = ManeuverScript(np.deg2rad(angle_deg), np.deg2rad(trig), n_p)
    state0 = SimState(0.0, 0.0, 0.0, 0.0, v0, 0.0, 0.0)
    return simulate(models, state0, h, t_end, script.controller())


def run_schedule(
    models: ShipModels,
    state0: SimState,
    rudder: Callable[[float], float],
    n_p: float,
    h: float,
    t_end: float,
) -> SimHistory:
    """Integrate with a time-scheduled rudder angle omega(t)."""
    return simulate(models, state0, h, t_end, lambda s, _: (n_p, rudder(s.t)))


# path-constrained re-simulation ----------------------------------------------

class _PathGeometry:
    """s', s'', theta, theta', theta'' at arbitrary sigma."""

    def __init__(self, path: PathSpec | PathSamples, nodes: int = 4000):
        if isinstance(path, PathSpec):
            path = sample_path(path, nodes)
        cols = np.column_stack([path.s1p, path.s2p, path.s1pp, path.s2pp, path.theta, path.thetap, path.thetapp])
        self._spline = CubicSpline(path.sigma, cols, axis=0)

    def __call__(self, sigma: float) -> np.ndarray:
        return self._spline(min(max(sigma, 0.0), 1.0))


@dataclass
class ResimResult:
    """Path-following re-simulation of a plan."""

    t: np.ndarray
    sigma: np.ndarray
    sigma_dot: np.ndarray
    v: np.ndarray
    n_p: np.ndarray
    F_H: np.ndarray
    F_R: np.ndarray
    beta: np.ndarray
    rudder: np.ndarray
    node_speed_sim: np.ndarray
    node_speed_plan: np.ndarray
    drift_flags: int
    rudder_flags: int
    completed: bool

    @property
    def voyage_time(self) -> float:
        return float(self.t[-1])

    @property
    def rms_relative_deviation(self) -> float:
        rel = (self.node_speed_sim - self.node_speed_plan) / self.node_speed_plan
        return float(np.sqrt(np.mean(rel**2)))


class _PathDynamics:
    """sigma'' and the lateral forces (F_H, F_R total) that keep the vessel on the path.

    Scalar hot loop, so constants are precomputed and math replaces numpy.
    """

    def __init__(self, geo: _PathGeometry, models: ShipModels, iterations: int = 6):
        vessel, prop = models.vessel, models.prop
        self.geo = geo
        self.iterations = iterations
        m = vessel.mass_matrix
        self.mx, self.mz = float(m[0, 0]), float(m[2, 2])
        self.tau = vessel.tau
        self.k_p = prop.k_p
        t1, t2, t3 = prop.thrust_coeffs
        self.t1, self.t2, self.t3 = t1, t2, t3
        self.kP = vessel.x_T * vessel.added_mass_per_length
        self.kI = hydro.induced_drag_coefficient(vessel)
        self.half_rho_A = 0.5 * vessel.rho * vessel.A_s
        self.C_R = vessel.C_R
        self.Rn_per_v = vessel.L / vessel.nu
        self.inflow_v = vessel.rudder.k_tm**2 * (1 - prop.f_w) ** 2
        self.inflow_T = vessel.rudder.k_tm**2 / hydro.thrust_inflow_scale(prop)
        self.c_R = hydro.rudder_drag_coefficient(vessel)
        self.L_H, self.L_P, self.L_R = vessel.L_H, vessel.L_P, vessel.L_R

    def __call__(self, sigma: float, sdot: float, n_p: float):
        s1p, s2p, s1pp, s2pp, _, thp, thpp = self.geo(sigma).tolist()
        spn = math.hypot(s1p, s2p)
        c, s = s1p / spn, s2p / spn
        v = spn * abs(sdot)
        mx, mz, tau = self.mx, self.mz, self.tau
        T_one = self.t1 * n_p * n_p - self.t2 * v * n_p - self.t3 * v * v
        F_P = self.kP * v * thp * sdot
        # global-frame balance projected on the path tangent and normal, plus yaw
        acc_t = mx * (c * s1pp + s * s2pp)
        acc_n = mx * (-s * s1pp + c * s2pp)
        tau_t = c * tau[0] + s * tau[1]
        tau_n = -s * tau[0] + c * tau[1]
        Rn = max(v, 1e-3) * self.Rn_per_v
        C_F = 0.075 / (math.log10(Rn) - 2.0) ** 2
        aD = self.half_rho_A * (C_F + self.C_R)
        inflow = self.inflow_v * v * v + self.inflow_T * T_one
        mt = mx * spn
        F_D = D_R = F_H = F_R = 0.0
        sdd = 0.0
        for _ in range(self.iterations):
            along = self.k_p * T_one - F_D - D_R
            sdd = (along - acc_t * sdot * sdot - tau_t) / mt
            # lateral: F_H + F_P - F_R = acc_n sdot^2 + tau_n (normal mass term vanishes)
            lat = acc_n * sdot * sdot + tau_n - F_P
            # yaw: L_H F_H - L_P F_P + L_R F_R = mz (theta' sdd + theta'' sdot^2) + tau_N
            yaw = mz * (thp * sdd + thpp * sdot * sdot) + tau[2] + self.L_P * F_P
            F_R = (yaw - self.L_H * lat) / (self.L_H + self.L_R)
            F_H = lat + F_R
            F_D = aD * v * v + (self.kI * F_H * F_H / (v * v) if v > 0 else 0.0)
            D_R = F_R * F_R / (self.k_p * self.c_R * inflow) if inflow > 0 else 0.0
        return sdd, F_H, F_R, v, T_one, inflow


def resimulate_plan(
    sol,
    path: PathSpec | PathSamples,
    models: ShipModels,
    h: float = 0.01,
    t_max: float | None = None,
) -> ResimResult:
    """Follow the path with the planned shaft speed profile n_p(sigma).

    Shaft speed is interpolated linearly between control nodes. At each
    instant the along-path acceleration and the drift and rudder forces are
    solved from the three equations of motion; drift and rudder angles are
    recovered from those forces and flagged when they exceed their limits.
    """
    vessel, prop = models.vessel, models.prop
    dyn = _PathDynamics(_PathGeometry(path), models)
    N = sol.sigma.size - 1
    sig_c = sol.sigma[:N]
    n_ctrl = sol.n_p
    sig_list = sig_c.tolist()
    n_list = n_ctrl.tolist()
    ds = sig_list[1] - sig_list[0]

    def n_of(sg: float) -> float:
        k = min(max(int(sg / ds), 0), len(sig_list) - 1)
        if k == len(sig_list) - 1:
            return n_list[-1]
        a = (sg - sig_list[k]) / ds
        return (1 - a) * n_list[k] + a * n_list[k + 1]
    sp0 = sol.sp12[0]
    sdot = sol.v[0] / np.sqrt(sp0)
    if not sdot > 0:
        raise ValueError("re-simulation needs a positive initial speed")
    if t_max is None:
        t_max = 3.0 * sol.time_exact + 10.0

    def f(y):
        sdd, *_ = dyn(y[0], y[1], n_of(y[0]))
        return np.array([y[1], sdd])

    y = np.array([0.0, sdot])
    ts, ys = [0.0], [y.copy()]
    t = 0.0
    completed = False
    while t < t_max:
        k1 = f(y)
        y_new = y + h * f(y + h / 2 * k1)
        t += h
        if y_new[1] <= 0:
            break
        if y_new[0] >= 1.0:
            # linear interpolation of the crossing time
            frac = (1.0 - y[0]) / (y_new[0] - y[0])
            ts.append(t - h + frac * h)
            ys.append(y + frac * (y_new - y))
            completed = True
            break
        y = y_new
        ts.append(t)
        ys.append(y.copy())
    ts = np.asarray(ts)
    ys = np.asarray(ys)

    r = vessel.rudder
    rows = []
    for sg, sd in ys:
        n = n_of(sg)
        _, F_H, F_R, v, T_one, inflow = dyn(sg, sd, n)
        q = 0.5 * vessel.rho * v**2 * vessel.S
        beta = ((F_H / q) - vessel.a_L0) / vessel.a_L1 if q > 0 else 0.0
        den = prop.k_p * 0.5 * vessel.rho * r.lift_slope * r.A_R * inflow
        sin_w = F_R / den if den > 0 else np.sign(F_R) * np.inf
        omega = float(np.arcsin(np.clip(sin_w, -1, 1))) if np.isfinite(sin_w) else np.sign(sin_w) * np.pi / 2
        rows.append((v, n, F_H, F_R, beta, omega, abs(sin_w) > 1))
    rec = np.asarray(rows, dtype=float)
    v_sim = rec[:, 0]
    beta = rec[:, 4]
    omega = rec[:, 5]
    drift_flags = int(np.sum(np.abs(beta) > vessel.beta_max * (1 + 1e-6)))
    rudder_flags = int(np.sum((np.abs(omega) > r.omega_max * (1 + 1e-6)) | (rec[:, 6] > 0)))

    reach = sol.sigma <= ys[-1, 0] + 1e-12
    node_sim = np.interp(sol.sigma[reach], ys[:, 0], v_sim)
    return ResimResult(
        t=ts, sigma=ys[:, 0], sigma_dot=ys[:, 1], v=v_sim, n_p=rec[:, 1], F_H=rec[:, 2], F_R=rec[:, 3],
        beta=beta, rudder=omega, node_speed_sim=node_sim, node_speed_plan=sol.v[reach],
        drift_flags=drift_flags, rudder_flags=rudder_flags, completed=completed,
    )


def order_of_accuracy(
    models: ShipModels,
    v0: float = 1.0,
    angle_deg: float = 20.0,
    t_end: float = 10.0,
    steps=(0.02, 0.01),
    h_ref: float = 0.0025,
) -> tuple[float, list[float]]:
    """Ratio of final-state errors against a fine reference for two step sizes.

    The manoeuvre is the opening of a zig-zag: steady running, rudder put over
    at t = 0 and held, which keeps the right-hand side smooth.
    """
    n_p = steady_shaft_speed(v0, models)
    state0 = SimState(0.0, 0.0, 0.0, 0.0, v0, 0.0, 0.0)
    rudder = lambda t: np.deg2rad(angle_deg)
    ref = run_schedule(models, state0, rudder, n_p, h_ref, t_end).final_state().as_array()
    errs = []
    for h in steps:
        end = run_schedule(models, state0, rudder, n_p, h, t_end).final_state().as_array()
        errs.append(float(np.linalg.norm(end - ref)))
    return errs[0] / errs[1], errs
