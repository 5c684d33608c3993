"""Electric machine, converter and battery models in fictive-force form.

A fictive force is a power divided by sqrt(b), i.e. energy per unit of the
path coordinate. Power limits become affine through the tangent of
b -> b^(-1/2) at the reference speed v_ref.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import NamedTuple, Sequence

import numpy as np

from .hydro import VesselModel, drag_constant, friction_coefficient
from .propeller import PropellerModel, physical_torque, shaft_speed_for_thrust

Interval = tuple[float, float]


@dataclass(frozen=True)
class DrivetrainModel:
    """Electric machine and gearbox.

    ``i_g`` is the propeller-to-motor speed ratio, n_p = i_g n_EM, so the shaft
    limits are n_p <= i_g n_EM_max and Q_p <= eta_g Q_EM_max / i_g. Speeds are in
    rev/s.
    """

    eta_EM: float
    eta_g: float
    eta_inv: float
    i_g: float
    n_EM_max: float
    Q_EM_max: float
    P_EM_max: float
    v_ref: float

    def __post_init__(self):
        for name in ("eta_EM", "eta_g", "eta_inv"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        for name in ("i_g", "n_EM_max", "Q_EM_max", "P_EM_max", "v_ref"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def eta_tilde(self) -> float:
        return self.eta_EM * self.eta_g * self.eta_inv

    @property
    def n_p_max(self) -> float:
        return self.i_g * self.n_EM_max

    @property
    def Q_p_max(self) -> float:
        return self.eta_g * self.Q_EM_max / self.i_g


@dataclass(frozen=True)
class ConverterModel:
    """K identical fuel converters with affine fuel map a_c0 + a_c1 P (mg/s)."""

    a_c0: float
    a_c1: float
    P_c_max: float
    K: int
    k_c: np.ndarray | None = None  # per control node on-count

    def __post_init__(self):
        if self.a_c0 < 0 or self.a_c1 < 0 or self.P_c_max <= 0:
            raise ValueError("converter parameters must be nonnegative, P_c_max positive")
        if int(self.K) != self.K or self.K < 0:
            raise ValueError("K must be a nonnegative integer")
        if self.k_c is not None:
            k = np.asarray(self.k_c, dtype=int)
            if np.any(k < 0) or np.any(k > self.K):
                raise ValueError("k_c entries must lie in [0, K]")
            k.setflags(write=False)
            object.__setattr__(self, "k_c", k)

    def with_schedule(self, k_c) -> "ConverterModel":
        return ConverterModel(self.a_c0, self.a_c1, self.P_c_max, self.K, np.asarray(k_c))

    def scaled(self, P_c_max: float) -> "ConverterModel":
        """Same converter family at another rating; efficiency at rated power is kept."""
        return ConverterModel(self.a_c0 * P_c_max / self.P_c_max, self.a_c1, P_c_max, self.K, self.k_c)


@dataclass(frozen=True)
class BatteryModel:
    U0: float
    R_i: float
    E_max: float
    E0: float
    dE_min: float
    dE_max: float
    P_cha_max: float
    P_dis_max: float
    eta_dcdc: float
    soc_sustaining: bool = True

    def __post_init__(self):
        if self.U0 <= 0 or self.R_i <= 0:
            raise ValueError("U0 and R_i must be positive")
        if not self.dE_min <= 0 <= self.dE_max:
            raise ValueError("require dE_min <= 0 <= dE_max")
        if not 0 <= self.E0 <= self.E_max:
            raise ValueError("initial battery energy must lie in [0, E_max]")
        if self.P_cha_max < 0 or self.P_dis_max < 0:
            raise ValueError("battery power limits must be nonnegative")
        if not 0 < self.eta_dcdc <= 1:
            raise ValueError("eta_dcdc must lie in (0, 1]")

    @property
    def loss_coefficient(self) -> float:
        """R_i / U0^2: dissipated power per squared terminal power."""
        return self.R_i / self.U0**2


def taylor_force_limit(P_max, b, sp12, v_ref):
    """Tangent of P_max / sqrt(b) at b_r = v_ref^2 / s'12, affine in b."""
    sp12 = np.asarray(sp12, dtype=float)
    return 0.5 * P_max * np.sqrt(sp12) / v_ref * (3.0 - sp12 * np.asarray(b) / v_ref**2)


class EMCheck(NamedTuple):
    F_EM: np.ndarray
    speed_residual: np.ndarray   # ntil - n_p_max^2 (<= 0 feasible)
    torque_residual: np.ndarray  # Q_p - Q_p_max
    power_residual: np.ndarray   # F_EM - Taylor bound


def em_force_and_limits(F_dEp, b, ntil, Q_p, drv: DrivetrainModel, sp12) -> EMCheck:
    F_EM = np.asarray(F_dEp) / drv.eta_tilde
    return EMCheck(
        F_EM,
        np.asarray(ntil) - drv.n_p_max**2,
        np.asarray(Q_p) - drv.Q_p_max,
        F_EM - taylor_force_limit(drv.P_EM_max, b, sp12, drv.v_ref),
    )


def converter_force(F_c, y_t, conv: ConverterModel):
    """Internal converter force a_c0 y_t + (a_c1 - 1) F_c."""
    return conv.a_c0 * np.asarray(y_t) + (conv.a_c1 - 1.0) * np.asarray(F_c)


def battery_loss_epigraph(F_bat, y_t, batt: BatteryModel):
    """Lower bound (R_i/U0^2) F_bat^2 / y_t on the dissipated fictive force."""
    F_bat, y_t = np.broadcast_arrays(np.asarray(F_bat, dtype=float), np.asarray(y_t, dtype=float))
    if np.any((y_t <= 0) & (F_bat != 0)):
        raise ValueError("battery loss unbounded at y_t <= 0 with nonzero F_bat")
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(F_bat == 0, 0.0, F_bat**2 / np.where(y_t > 0, y_t, 1.0))
    return batt.loss_coefficient * q


def energy_balance_residual(F_dEp, y_t, F_batd, F_c, F_bat, k_c, *, k_p, eta_tilde, P_aux, eta_dcdc):
    """Demand minus supply; feasible when <= 0 and tight when 0."""
    demand = k_p * np.asarray(F_dEp) / eta_tilde + P_aux * np.asarray(y_t) + np.asarray(F_batd)
    supply = np.asarray(k_c) * np.asarray(F_c) + eta_dcdc * np.asarray(F_bat)
    return demand - supply


def soc_trajectory(F_bat, dsigma: float, dE0: float = 0.0):
    """Battery energy deviation at the N+1 nodes from forward-Euler integration of dE/dsigma = -F_bat."""
    F_bat = np.asarray(F_bat, dtype=float)
    return dE0 - np.concatenate([[0.0], np.cumsum(F_bat) * dsigma])


def in_intervals(sigma, intervals: Sequence[Interval], tol: float = 1e-12):
    sigma = np.asarray(sigma, dtype=float)
    mask = np.zeros(sigma.shape, dtype=bool)
    for a, b in intervals:
        mask |= (sigma >= a - tol) & (sigma <= b + tol)
    return mask


def steady_power(v, vessel: VesselModel, prop: PropellerModel, drv: DrivetrainModel, P_aux: float) -> float:
    """Electrical bus power to hold speed v on a straight path."""
    drag = float(drag_constant(friction_coefficient(v, vessel), vessel)) * v**2
    n = float(shaft_speed_for_thrust(drag / prop.k_p, v, prop))
    if not np.isfinite(n):
        return float("inf")
    Q = float(physical_torque(v, n, prop))
    return prop.k_p * 2 * np.pi * Q * n / drv.eta_tilde + P_aux


def converter_schedule(
    sigma_ctrl,
    conv: ConverterModel,
    zero_emission: Sequence[Interval] = (),
    speed_limits: Sequence[tuple[Interval, float]] = (),
    power_at=None,
) -> np.ndarray:
    """On-count per control node.

    Zero on zero-emission legs; on speed-limited legs just enough converters
    to cover the steady demand ``power_at(v_max)``; K elsewhere.
    """
    sigma_ctrl = np.asarray(sigma_ctrl, dtype=float)
    k = np.full(sigma_ctrl.shape, conv.K, dtype=int)
    if power_at is not None:
        for (a, b), vmax in speed_limits:
            need = min(conv.K, max(1, ceil(power_at(vmax) / conv.P_c_max - 1e-12)))
            mask = in_intervals(sigma_ctrl, [(a, b)])
            k[mask] = np.minimum(k[mask], need)
    k[in_intervals(sigma_ctrl, zero_emission)] = 0
    return k


@dataclass(frozen=True)
class ShipModels:
    """All physical models of one vessel."""

    vessel: VesselModel
    prop: PropellerModel
    drv: DrivetrainModel
    conv: ConverterModel
    batt: BatteryModel
