"""Scenario files: JSON schema, validation and conversion to model objects.

Units follow the vessel data sheet: battery energies in Wh, motor speed in
rad/s, angles in degrees. They are converted to SI (J, rev/s, rad) here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .hydro import RudderModel, VesselModel
from .ocp import Mission, MissionError
from .path import PathSamples, PathSpec, random_control_points, sample_path
from .powertrain import BatteryModel, ConverterModel, DrivetrainModel, ShipModels
from .propeller import OpenWaterCurve, PropellerModel, fit_poly2, read_wageningen_csv

WH = 3600.0


class ScenarioError(ValueError):
    """Invalid scenario file; the message names the offending field or invariant."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PathIn(_Strict):
    control_points: Optional[list[tuple[float, float]]] = None
    seed: Optional[int] = None
    count: int = Field(40, ge=5)

    @model_validator(mode="after")
    def _source(self):
        if self.control_points is None and self.seed is None:
            raise ValueError("give control_points or seed")
        if self.control_points is not None and len(self.control_points) < 5:
            raise ValueError("at least 5 control points are required")
        return self


class RudderIn(_Strict):
    A_R: float = Field(gt=0)
    b_R: float = Field(gt=0)
    omega_max_deg: float = Field(20.0, gt=0, le=20.0)
    k_tm: float = Field(0.9, gt=0, le=1)


class VesselIn(_Strict):
    m: float = Field(gt=0)
    Izz: float = Field(gt=0)
    L: float = Field(gt=0)
    T: float = Field(gt=0)
    A_s: float = Field(gt=0)
    S: float = Field(gt=0)
    Omega: float = Field(gt=0)
    a_L1: float = Field(gt=0)
    a_L0: float = 0.0
    beta_max_deg: float = Field(gt=0, lt=90)
    C_R: float = Field(ge=0)
    L_H: float
    L_P: float
    L_R: float
    k1: float = Field(0.0, ge=0)
    k2: float = Field(0.0, ge=0)
    Iw: float = Field(0.0, ge=0)
    x_T: Optional[float] = None
    nu: float = Field(1.0e-6, gt=0)
    rho: float = Field(997.0, gt=0)
    tau: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rudder_drag_rho_power: Literal[1, 2] = 2
    B_wl: Optional[float] = Field(None, gt=0)
    displacement: Optional[float] = Field(None, gt=0)
    rudder: RudderIn


class FitIn(_Strict):
    file: str
    index: int = Field(0, ge=0)
    constrain_linear_zero: bool = False
    J_design: Optional[float] = None


class PropellerIn(_Strict):
    D_p: float = Field(gt=0)
    f_w: float = Field(ge=0, lt=1)
    k_p: int = Field(1, ge=1)
    a_T0: Optional[float] = Field(None, gt=0)
    a_T1: float = Field(0.0, ge=0)
    a_T2: Optional[float] = Field(None, ge=0)
    a_Q0: Optional[float] = Field(None, gt=0)
    a_Q1: float = Field(0.0, ge=0)
    a_Q2: Optional[float] = Field(None, ge=0)
    fit: Optional[FitIn] = None

    @model_validator(mode="after")
    def _source(self):
        given = [self.a_T0, self.a_T2, self.a_Q0, self.a_Q2]
        if self.fit is None and any(g is None for g in given):
            raise ValueError("give a_T0, a_T2, a_Q0, a_Q2 or a fit request")
        return self


class DrivetrainIn(_Strict):
    eta_EM: float = Field(gt=0, le=1)
    eta_g: float = Field(gt=0, le=1)
    eta_inv: float = Field(1.0, gt=0, le=1)
    i_g: float = Field(gt=0)
    n_EM_max_rad_s: float = Field(gt=0)
    Q_EM_max: float = Field(gt=0)
    P_EM_max: float = Field(gt=0)
    v_ref: float = Field(gt=0)


class ConverterIn(_Strict):
    a_c0: float = Field(ge=0)
    a_c1: float = Field(ge=0)
    P_c_max: float = Field(gt=0)
    K: int = Field(ge=0)


class BatteryIn(_Strict):
    U0: float = Field(gt=0)
    R_i: float = Field(gt=0)
    E_max_Wh: float = Field(gt=0)
    E0_Wh: float = Field(ge=0)
    soc_min: float = Field(0.0, ge=0, le=1)
    soc_max: float = Field(1.0, ge=0, le=1)
    P_cha_max: float = Field(ge=0)
    P_dis_max: float = Field(ge=0)
    eta_dcdc: float = Field(gt=0, le=1)
    soc_sustaining: bool = True

    @model_validator(mode="after")
    def _energy(self):
        if self.E0_Wh > self.E_max_Wh:
            raise ValueError("invariant E0 <= E_max violated: initial battery energy exceeds capacity")
        if self.soc_min > self.soc_max:
            raise ValueError("invariant soc_min <= soc_max violated")
        soc0 = self.E0_Wh / self.E_max_Wh
        if not self.soc_min <= soc0 <= self.soc_max:
            raise ValueError("invariant soc_min <= E0/E_max <= soc_max violated")
        return self


class SpeedLimitIn(_Strict):
    interval: tuple[float, float]
    v_max: float = Field(gt=0)


class MissionIn(_Strict):
    v_init: float = Field(ge=0)
    v_final: Optional[float] = Field(None, ge=0)
    omega_T: float = Field(ge=0)
    speed_limits: list[SpeedLimitIn] = []
    zero_emission_legs: list[tuple[float, float]] = []
    battery_only_legs: list[tuple[float, float]] = []
    P_aux: float = Field(0.0, ge=0)
    N: int = Field(399, ge=2)


class SolverIn(_Strict):
    backend: Optional[Literal["ipm", "clarabel"]] = None
    tol: float = Field(1e-8, gt=0, lt=1e-2)
    friction_passes: int = Field(1, ge=0)


class OutputIn(_Strict):
    directory: str = "out"


class ScenarioIn(_Strict):
    name: str = "scenario"
    description: str = ""
    path: PathIn
    vessel: VesselIn
    propeller: PropellerIn
    drivetrain: DrivetrainIn
    converter: ConverterIn
    battery: BatteryIn
    mission: MissionIn
    solver: SolverIn = SolverIn()
    output: OutputIn = OutputIn()


@dataclass(frozen=True)
class Scenario:
    name: str
    path_spec: PathSpec
    models: ShipModels
    mission: Mission
    backend: str | None
    tol: float
    friction_passes: int
    output_dir: Path
    source: Path | None = None
    seed: int | None = None
    fit_report: object = None

    def samples(self, N: int | None = None) -> PathSamples:
        return sample_path(self.path_spec, N or self.mission.N)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def _build(doc: ScenarioIn, base: Path | None) -> Scenario:
    if doc.path.control_points is not None:
        pts = np.asarray(doc.path.control_points, dtype=float)
    else:
        pts = random_control_points(doc.path.seed, doc.path.count)
    spec = PathSpec(pts)

    v = doc.vessel
    r = v.rudder
    vessel = VesselModel(
        m=v.m, Izz=v.Izz, L=v.L, T=v.T, A_s=v.A_s, S=v.S, Omega=v.Omega, a_L1=v.a_L1,
        beta_max=np.deg2rad(v.beta_max_deg), C_R=v.C_R, L_H=v.L_H, L_P=v.L_P, L_R=v.L_R,
        rudder=RudderModel(r.A_R, r.b_R, np.deg2rad(r.omega_max_deg), r.k_tm),
        k1=v.k1, k2=v.k2, Iw=v.Iw, a_L0=v.a_L0, x_T=v.x_T, nu=v.nu, rho=v.rho, tau=v.tau,
        rudder_drag_rho_power=v.rudder_drag_rho_power,
    )

    p = doc.propeller
    fit_report = None
    if p.fit is not None:
        fpath = Path(p.fit.file)
        if not fpath.is_absolute() and base is not None:
            fpath = base / fpath
        if not fpath.exists():
            raise ScenarioError(f"propeller.fit.file: {fpath} does not exist")
        props = read_wageningen_csv(fpath)
        if p.fit.index >= len(props):
            raise ScenarioError(f"propeller.fit.index: file holds {len(props)} propellers")
        curve = OpenWaterCurve.from_terms(props[p.fit.index])
        prop, fit_report = fit_poly2(curve, p.fit.constrain_linear_zero, D_p=p.D_p, f_w=p.f_w,
                                     k_p=p.k_p, rho=v.rho, J_design=p.fit.J_design)
    else:
        prop = PropellerModel(D_p=p.D_p, f_w=p.f_w, a_T0=p.a_T0, a_T1=p.a_T1, a_T2=p.a_T2,
                              a_Q0=p.a_Q0, a_Q1=p.a_Q1, a_Q2=p.a_Q2, k_p=p.k_p, rho=v.rho)

    d = doc.drivetrain
    drv = DrivetrainModel(d.eta_EM, d.eta_g, d.eta_inv, d.i_g, d.n_EM_max_rad_s / (2 * np.pi),
                          d.Q_EM_max, d.P_EM_max, d.v_ref)
    c = doc.converter
    conv = ConverterModel(c.a_c0, c.a_c1, c.P_c_max, c.K)
    bt = doc.battery
    E_max, E0 = bt.E_max_Wh * WH, bt.E0_Wh * WH
    batt = BatteryModel(
        U0=bt.U0, R_i=bt.R_i, E_max=E_max, E0=E0,
        dE_min=bt.soc_min * E_max - E0, dE_max=bt.soc_max * E_max - E0,
        P_cha_max=bt.P_cha_max, P_dis_max=bt.P_dis_max, eta_dcdc=bt.eta_dcdc,
        soc_sustaining=bt.soc_sustaining,
    )
    ms = doc.mission
    mission = Mission(
        v_init=ms.v_init, v_final=ms.v_final, omega_T=ms.omega_T,
        speed_limits=tuple((tuple(s.interval), s.v_max) for s in ms.speed_limits),
        zero_emission_legs=tuple(map(tuple, ms.zero_emission_legs)),
        battery_only_legs=tuple(map(tuple, ms.battery_only_legs)),
        P_aux=ms.P_aux, N=ms.N,
    )
    out = Path(doc.output.directory)
    return Scenario(
        name=doc.name, path_spec=spec, models=ShipModels(vessel, prop, drv, conv, batt),
        mission=mission, backend=doc.solver.backend, tol=doc.solver.tol,
        friction_passes=doc.solver.friction_passes, output_dir=out,
        seed=doc.path.seed, fit_report=fit_report,
    )


def parse_scenario_dict(data: dict, base: Path | None = None) -> Scenario:
    try:
        doc = ScenarioIn.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(_format_errors(err)) from None
    try:
        return _build(doc, base)
    except (MissionError, ValueError) as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError(str(err)) from None


def parse_scenario(file: str | Path) -> Scenario:
    """Read and validate a scenario JSON file. Bundled names resolve without a path."""
    path = resolve_scenario_path(file)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path}: invalid JSON ({err})") from None
    sc = parse_scenario_dict(data, base=path.parent)
    return Scenario(**{**sc.__dict__, "source": path})


def bundled_scenarios() -> list[str]:
    root = resources.files("shipplan") / "data"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario_path(file: str | Path) -> Path:
    path = Path(file)
    if path.exists():
        return path
    name = str(file) if str(file).endswith(".json") else f"{file}.json"
    bundled = resources.files("shipplan") / "data" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"scenario file {file} not found (bundled: {', '.join(bundled_scenarios())})")


def load_raw(file: str | Path) -> dict:
    return json.loads(resolve_scenario_path(file).read_text(encoding="utf-8"))
