"""Brute-force dynamic programming over a speed grid, used to cross-check the convex planner.

Only straight paths without battery use are supported: the state is the
squared path speed b at each node, the stage cost is the planner's objective
term, and every transition is evaluated with the physical propeller and drag
models (no relaxations). Any DP trajectory is feasible for the convex program,
so the DP value bounds the convex optimum from above and decreases under
nested grid refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hydro import drag_constant, friction_coefficient
from .ocp import Mission, mission_schedule
from .path import PathSamples
from .powertrain import ShipModels, taylor_force_limit
from .propeller import physical_torque, shaft_speed_for_thrust


class OracleInfeasible(RuntimeError):
    """No grid trajectory satisfies the boundary conditions and limits."""


@dataclass(frozen=True)
class DPResult:
    objective: float
    b: np.ndarray
    v: np.ndarray
    n_p: np.ndarray
    grid_size: int


def speed_grid(v_lo: float, v_hi: float, level: int = 0, base: int = 200) -> np.ndarray:
    """Nested speed grids: level k has (base - 1) 2^k + 1 points, each containing the previous."""
    return np.linspace(v_lo, v_hi, (base - 1) * 2**level + 1)


def _straight(path: PathSamples, tol: float = 1e-9) -> bool:
    scale = np.sqrt(path.sp12.max())
    return (np.ptp(path.theta) <= tol and np.ptp(path.sp12) <= tol * path.sp12.max()
            and np.abs(np.hypot(path.s1pp, path.s2pp)).max() <= tol * scale)


def dp_oracle(
    path: PathSamples,
    models: ShipModels,
    mission: Mission,
    speeds: np.ndarray,
    C_F=None,
) -> DPResult:
    """Minimum of the planner objective over trajectories with node speeds on ``speeds``.

    The initial (and, if given, final) speed is fixed by the mission; all
    other nodes take values from the grid. ``C_F`` gives the friction
    coefficient per control node (default: evaluated at the Taylor reference
    speed, as the planner does).
    """
    if not _straight(path):
        raise ValueError("the dynamic-programming oracle needs a straight path")
    vessel, prop, drv, conv = models.vessel, models.prop, models.drv, models.conv
    N = path.N
    ds = path.dsigma
    sp = float(path.sp12[0])
    spn = np.sqrt(sp)
    k_c = mission_schedule(path, models, mission)
    if np.any(k_c == 0):
        raise ValueError("the oracle has no battery dimension; every node needs a converter")
    if C_F is None:
        C_F = friction_coefficient(np.full(N, drv.v_ref), vessel)
    a_D = drag_constant(np.broadcast_to(np.asarray(C_F, float), (N,)), vessel)
    m_s = vessel.mass_matrix[0, 0]
    if any(vessel.tau):
        raise ValueError("the oracle assumes no external disturbance")

    grid_b = np.asarray(speeds, float) ** 2 / sp
    states = [np.array([mission.v_init**2 / sp])]
    for _ in range(N - 1):
        states.append(grid_b)
    states.append(np.array([mission.v_final**2 / sp]) if mission.v_final is not None else grid_b)

    limits = mission.speed_limits
    vmax2 = np.full(N + 1, np.inf)
    for (lo, hi), vm in limits:
        sel = (path.sigma >= lo - 1e-12) & (path.sigma <= hi + 1e-12)
        vmax2[sel] = np.minimum(vmax2[sel], vm**2)

    cost_to_go = np.where(states[N] * sp <= vmax2[N] + 1e-12, 0.0, np.inf)
    policy = []
    for i in range(N - 1, -1, -1):
        b0 = states[i][:, None]
        b1 = states[i + 1][None, :]
        v = np.sqrt(sp * b0)
        thrust = (m_s * spn * (b1 - b0) / (2 * ds) + a_D[i] * sp * b0) / prop.k_p
        thrust, v = np.broadcast_arrays(thrust, v)
        with np.errstate(invalid="ignore"):
            n = shaft_speed_for_thrust(thrust, v, prop)
            Q = physical_torque(v, n, prop)
            F_dEp = 2 * np.pi * Q * n / np.sqrt(b0)
            y_t = 1.0 / np.sqrt(b0)
            taylor = taylor_force_limit(1.0, b0, sp, drv.v_ref)
            demand = prop.k_p * F_dEp / drv.eta_tilde + mission.P_aux * y_t
            F_c = np.maximum(demand, 0.0) / k_c[i]
            ok = (np.isfinite(n) & (n**2 <= drv.n_p_max**2 * (1 + 1e-12)) & (Q <= drv.Q_p_max)
                  & (F_dEp / drv.eta_tilde <= taylor * drv.P_EM_max) & (F_c <= taylor * conv.P_c_max)
                  & (b0 * sp <= vmax2[i] + 1e-12))
            stage = ((k_c[i] * conv.a_c0 + mission.omega_T) * y_t + k_c[i] * conv.a_c1 * F_c) * ds
        total = np.where(ok, stage, np.inf) + cost_to_go[None, :]
        best = np.argmin(total, axis=1)
        cost_to_go = total[np.arange(total.shape[0]), best]
        policy.append(best)
    policy.reverse()
    if not np.isfinite(cost_to_go[0]):
        raise OracleInfeasible("no grid trajectory meets the boundary conditions; refine or widen the grid")

    idx = [0]
    for i in range(N):
        idx.append(int(policy[i][idx[-1]]))
    b = np.array([states[i][k] for i, k in enumerate(idx)])
    v = np.sqrt(sp * b)
    thrust = (m_s * spn * np.diff(b) / (2 * ds) + a_D * sp * b[:N]) / prop.k_p
    n = shaft_speed_for_thrust(thrust, v[:N], prop)
    return DPResult(float(cost_to_go[0]), b, v, np.asarray(n), len(speeds))
