"""Hull and rudder hydrodynamics in physical and planner (convex) form.

Planner forms take the squared path speed ``b`` and the per-node constant
``sp12 = s1'^2 + s2'^2`` so that ``sp12 * b`` is the squared vessel speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .propeller import PropellerModel, physical_thrust

if TYPE_CHECKING:
    from .sim import SimState

STALL_ANGLE = np.deg2rad(20.0)


@dataclass(frozen=True)
class RudderModel:
    A_R: float
    b_R: float
    omega_max: float = STALL_ANGLE
    k_tm: float = 0.9

    def __post_init__(self):
        if self.A_R <= 0 or self.b_R <= 0:
            raise ValueError("rudder area and span must be positive")
        if not 0.0 < self.k_tm <= 1.0:
            raise ValueError("k_tm must lie in (0, 1]")
        if not 0.0 < self.omega_max <= STALL_ANGLE + 1e-12:
            raise ValueError("omega_max must lie in (0, 20 deg]")

    @property
    def Lambda(self) -> float:
        """Rudder aspect ratio b_R^2 / A_R."""
        return self.b_R**2 / self.A_R

    @property
    def lift_slope(self) -> float:
        """C_K per unit sin(omega)."""
        lam = self.Lambda
        return 2 * np.pi * lam * (lam + 1) / (lam + 2) ** 2


@dataclass(frozen=True)
class VesselModel:
    m: float
    Izz: float
    L: float
    T: float
    A_s: float
    S: float
    Omega: float
    a_L1: float
    beta_max: float
    C_R: float
    L_H: float
    L_P: float
    L_R: float
    rudder: RudderModel
    k1: float = 0.0
    k2: float = 0.0
    Iw: float = 0.0
    a_L0: float = 0.0
    x_T: float | None = None
    nu: float = 1.0e-6
    rho: float = 997.0
    tau: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rudder_drag_rho_power: int = 2

    def __post_init__(self):
        positive = dict(m=self.m, Izz=self.Izz, L=self.L, T=self.T, A_s=self.A_s, S=self.S,
                        Omega=self.Omega, nu=self.nu, rho=self.rho)
        bad = [k for k, v in positive.items() if not v > 0]
        if bad:
            raise ValueError(f"must be positive: {', '.join(bad)}")
        if min(self.k1, self.k2, self.Iw, self.C_R) < 0:
            raise ValueError("k1, k2, Iw and C_R must be nonnegative")
        if not 0 < self.beta_max < np.pi / 2:
            raise ValueError("beta_max must lie in (0, pi/2)")
        if self.rudder_drag_rho_power not in (1, 2):
            raise ValueError("rudder_drag_rho_power must be 1 or 2")
        if self.x_T is None:
            object.__setattr__(self, "x_T", self.L / 2)
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))

    @property
    def mass_matrix(self) -> np.ndarray:
        return np.diag([self.m * (1 + self.k1), self.m * (1 + self.k1), self.Izz + self.k2 * self.Iw])

    @property
    def C_L_max(self) -> float:
        return self.a_L0 + self.a_L1 * self.beta_max

    @property
    def added_mass_per_length(self) -> float:
        """Sectional added mass (pi/2) rho T^2 at the stern section."""
        return 0.5 * np.pi * self.rho * self.T**2


class HullForceSet(NamedTuple):
    """Force inputs in the vessel frame; T_p is the total thrust of all propellers."""

    T_p: float
    F_D: float
    F_H: float
    F_P: float
    F_R: float
    D_R: float
    warnings: tuple = ()


def friction_coefficient(v_s, vessel: VesselModel):
    """ITTC-57 friction line 0.075 / (log10(Rn) - 2)^2."""
    v = np.asarray(v_s, dtype=float)
    if np.any(v <= 0):
        raise ValueError("speed must be positive")
    Rn = v * vessel.L / vessel.nu
    if np.any(Rn <= 100.0):
        raise ValueError("Reynolds number must exceed 100")
    return 0.075 / (np.log10(Rn) - 2.0) ** 2


def drift_force_bound(b, sp12, vessel: VesselModel):
    """Largest drift lift |F_H| at squared speed sp12*b (affine in b)."""
    return 0.5 * vessel.rho * vessel.S * vessel.C_L_max * np.asarray(sp12) * np.asarray(b)


def drag_constant(C_F, vessel: VesselModel):
    """Coefficient a_D with friction-plus-residual drag a_D * v^2."""
    return 0.5 * vessel.rho * (np.asarray(C_F) + vessel.C_R) * vessel.A_s


def induced_drag_coefficient(vessel: VesselModel) -> float:
    """k_I with induced drag k_I * F_H^2 / v^2."""
    return 2.0 * vessel.A_s / (vessel.rho * np.pi * vessel.Omega * vessel.S**2)


def drag_epigraph_terms(F_H, b, sp12, vessel: VesselModel, C_F=None):
    """Lower bound on hull drag; quadratic-over-linear in (F_H, b).

    ``C_F`` defaults to the friction coefficient at the implied speed, in which
    case the bound coincides with the physical drag.
    """
    F_H, b, sp12 = np.broadcast_arrays(*map(np.asarray, (F_H, b, sp12)))
    vsq = sp12 * b
    if np.any((vsq <= 0) & (F_H != 0)):
        raise ValueError("induced drag unbounded at zero speed with nonzero drift force")
    if C_F is None:
        C_F = friction_coefficient(np.sqrt(vsq), vessel)
    with np.errstate(divide="ignore", invalid="ignore"):
        induced = np.where(F_H == 0, 0.0, F_H**2 / np.where(vsq > 0, vsq, 1.0))
    return drag_constant(C_F, vessel) * vsq + induced_drag_coefficient(vessel) * induced


def yaw_damping_force(b, sp12, thetap, vessel: VesselModel):
    """Stern-section sway force x_T m_a theta' sqrt(s'12) b (linear in b).

    Its moment about the center of gravity is -L_P F_P and opposes the turn.
    """
    return vessel.x_T * vessel.added_mass_per_length * np.asarray(thetap) * np.sqrt(sp12) * np.asarray(b)


def thrust_inflow_scale(prop: PropellerModel) -> float:
    """Dynamic pressure area (rho/2)(pi/4) D_p^2 used by the thrust loading coefficient."""
    return 0.5 * prop.rho * 0.25 * np.pi * prop.D_p**2


def rudder_inflow_sq(T_p, b, sp12, vessel: VesselModel, prop: PropellerModel):
    """Squared rudder inflow divided by k_tm^2, affine in (b, T_p); T_p per propeller."""
    return (1 - prop.f_w) ** 2 * np.asarray(sp12) * np.asarray(b) + np.asarray(T_p) / thrust_inflow_scale(prop)


def rudder_force_bound(T_p, b, sp12, vessel: VesselModel, prop: PropellerModel):
    """Largest lift of one rudder behind a propeller delivering T_p."""
    r = vessel.rudder
    ck = r.lift_slope * np.sin(r.omega_max)
    return 0.5 * vessel.rho * ck * r.A_R * r.k_tm**2 * rudder_inflow_sq(T_p, b, sp12, vessel, prop)


def rudder_drag_coefficient(vessel: VesselModel) -> float:
    """c_R with induced rudder drag D_R = F_R^2 / (c_R * inflow)."""
    r = vessel.rudder
    return r.A_R * np.pi * r.Lambda * vessel.rho**vessel.rudder_drag_rho_power * r.k_tm**2 / 2.2


def rudder_drag_epigraph(F_R, T_p, b, sp12, vessel: VesselModel, prop: PropellerModel):
    """Lower bound on the induced drag of one rudder with lift F_R."""
    F_R = np.asarray(F_R, dtype=float)
    den = rudder_inflow_sq(T_p, b, sp12, vessel, prop)
    den, F_R = np.broadcast_arrays(den, F_R)
    if np.any((den <= 0) & (F_R != 0)):
        raise ValueError("rudder drag unbounded with zero inflow and nonzero lift")
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(F_R == 0, 0.0, F_R**2 / np.where(den > 0, den, 1.0))
    return q / rudder_drag_coefficient(vessel)


def body_velocity(theta, xd, yd):
    """Surge and sway velocity in the vessel frame."""
    c, s = np.cos(theta), np.sin(theta)
    return c * xd + s * yd, -s * xd + c * yd


def physical_forces(state: "SimState", controls, vessel: VesselModel, prop: PropellerModel) -> HullForceSet:
    """Nonconvex force set for time-domain simulation.

    ``controls`` is ``(n_p, omega)``: shaft speed in rev/s (all propellers) and
    rudder angle in rad. Positive drift angle means the flow hits the hull from
    the port side and yields positive lift F_H.
    """
    n_p, omega = controls
    warns = []
    u, v = body_velocity(state.theta, state.xd, state.yd)
    vs = float(np.hypot(state.xd, state.yd))
    beta = float(np.arctan2(-v, u)) if vs > 0 else 0.0
    if abs(beta) > vessel.beta_max:
        warns.append("drift angle beyond beta_max")
        beta = float(np.clip(beta, -vessel.beta_max, vessel.beta_max))
    r = vessel.rudder
    if abs(omega) > r.omega_max + 1e-12:
        warns.append("rudder angle beyond omega_max")
        omega = float(np.clip(omega, -r.omega_max, r.omega_max))

    q = 0.5 * vessel.rho * vs**2
    C_L = vessel.a_L0 + vessel.a_L1 * beta
    F_H = q * vessel.S * C_L
    if vs * vessel.L / vessel.nu > 1e3:
        C_F = float(friction_coefficient(vs, vessel))
        F_D = drag_constant(C_F, vessel) * vs**2 + induced_drag_coefficient(vessel) * F_H**2 / vs**2
    else:
        F_D = 0.0
    F_P = vessel.x_T * vessel.added_mass_per_length * vs * state.thetad

    T_one = float(physical_thrust(vs, n_p, prop))
    inflow = r.k_tm**2 * float(rudder_inflow_sq(T_one, vs**2, 1.0, vessel, prop))
    if inflow < 0:
        warns.append("negative rudder inflow")
        inflow = 0.0
    C_K = r.lift_slope * np.sin(omega)
    F_R = prop.k_p * 0.5 * vessel.rho * C_K * r.A_R * inflow
    D_R = prop.k_p * 0.5 * vessel.rho * 1.1 * C_K**2 / (np.pi * r.Lambda) * r.A_R * inflow
    D_R /= vessel.rho ** (vessel.rudder_drag_rho_power - 1)
    return HullForceSet(prop.k_p * T_one, F_D, F_H, F_P, F_R, D_R, tuple(warns))


def generalized_forces(theta, f: HullForceSet, vessel: VesselModel) -> np.ndarray:
    """R(theta) u: forces in the global frame and yaw moment."""
    c, s = np.cos(theta), np.sin(theta)
    along = f.T_p - f.F_D - f.D_R
    lateral = f.F_H + f.F_P - f.F_R
    return np.array([
        c * along - s * lateral,
        s * along + c * lateral,
        vessel.L_H * f.F_H - vessel.L_P * f.F_P + vessel.L_R * f.F_R,
    ])
