"""Fixed-pitch propeller model: open-water fits and convex planner forms.

Planner variables per node are the squared path speed ``b``, the product
variable ``z`` (tight value ``v_s * n_p``) and ``ntil`` (tight value ``n_p**2``),
with ``n_p`` in rev/s.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import lsq_linear


class FitError(ValueError):
    """Sign-constrained fit could not be formed."""


@dataclass(frozen=True)
class PropellerModel:
    """Poly2 open-water coefficients plus geometry.

    K_T(J) = a_T0 - a_T1 J - a_T2 J^2 and K_Q(J) = a_Q0 - a_Q1 J - a_Q2 J^2.
    """

    D_p: float
    f_w: float
    a_T0: float
    a_T2: float
    a_Q0: float
    a_Q2: float
    a_T1: float = 0.0
    a_Q1: float = 0.0
    k_p: int = 1
    rho: float = 997.0

    def __post_init__(self):
        if self.D_p <= 0 or self.rho <= 0:
            raise ValueError("propeller diameter and density must be positive")
        if not 0.0 <= self.f_w < 1.0:
            raise ValueError("wake fraction must lie in [0, 1)")
        if self.a_T0 <= 0 or self.a_Q0 <= 0:
            raise ValueError("a_T0 and a_Q0 must be positive")
        if min(self.a_T1, self.a_T2, self.a_Q1, self.a_Q2) < 0:
            raise ValueError("a_T1, a_T2, a_Q1, a_Q2 must be nonnegative")
        if int(self.k_p) != self.k_p or self.k_p < 1:
            raise ValueError("k_p must be a positive integer")

    @property
    def reduced(self) -> bool:
        return self.a_T1 == 0.0 and self.a_Q1 == 0.0

    @property
    def thrust_coeffs(self) -> tuple[float, float, float]:
        """(aT1, aT2, aT3) multiplying ntil, z and s'12 b."""
        r, D, w = self.rho, self.D_p, 1.0 - self.f_w
        return self.a_T0 * r * D**4, self.a_T1 * r * D**3 * w, self.a_T2 * r * D**2 * w**2

    @property
    def torque_coeffs(self) -> tuple[float, float, float]:
        r, D, w = self.rho, self.D_p, 1.0 - self.f_w
        return self.a_Q0 * r * D**5, self.a_Q1 * r * D**4 * w, self.a_Q2 * r * D**3 * w**2

    @property
    def energy_coeffs(self) -> tuple[float, float, float]:
        """(k1, k2, k3) of the energy-input epigraph; 2*pi times the torque coefficients."""
        q1, q2, q3 = self.torque_coeffs
        return 2 * np.pi * q1, 2 * np.pi * q2, 2 * np.pi * q3

    def K_T(self, J):
        J = np.asarray(J, dtype=float)
        return self.a_T0 - self.a_T1 * J - self.a_T2 * J**2

    def K_Q(self, J):
        J = np.asarray(J, dtype=float)
        return self.a_Q0 - self.a_Q1 * J - self.a_Q2 * J**2


# planner forms ---------------------------------------------------------------

def thrust(b, z, ntil, sp12, prop: PropellerModel):
    """Thrust of one propeller, affine in (b, z, ntil)."""
    t1, t2, t3 = prop.thrust_coeffs
    return -t3 * np.asarray(sp12) * b - t2 * np.asarray(z) + t1 * np.asarray(ntil)


def torque(b, z, ntil, sp12, prop: PropellerModel):
    """Shaft torque of one propeller, affine in (b, z, ntil)."""
    q1, q2, q3 = prop.torque_coeffs
    return -q3 * np.asarray(sp12) * b - q2 * np.asarray(z) + q1 * np.asarray(ntil)


def energy_input_epigraph(b, z, ntil, sp12, prop: PropellerModel):
    """Lower bound on the propeller fictive force F_dEp = 2 pi Q n / sqrt(b).

    Both model variants are written as sqrt(s'12) * (-k3 z - k2 ntil + k1 ntil^2 / z),
    which equals 2 pi Q n / sqrt(b) when z takes its tight value sqrt(s'12 b ntil).
    For the reduced model (k2 = 0) the caller supplies z = sqrt(s'12 b ntil); see
    :func:`reduced_energy_input`.
    """
    k1, k2, k3 = prop.energy_coeffs
    b, z, ntil, sp12 = np.broadcast_arrays(*map(np.asarray, (b, z, ntil, sp12)))
    z = z.astype(float)
    ntil = ntil.astype(float)
    if np.any((z <= 0) & (ntil != 0)):
        raise ValueError("z must be positive when ntil is nonzero")
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(ntil == 0, 0.0, ntil**2 / np.where(z > 0, z, 1.0))
    return np.sqrt(sp12) * (-k3 * z - k2 * ntil + k1 * quad)


def reduced_energy_input(ntil, b, sp12, prop: PropellerModel):
    """Reduced-model energy input with z eliminated (jointly convex in (ntil, b))."""
    k1, _, k3 = prop.energy_coeffs
    ntil, b, sp12 = np.broadcast_arrays(*map(np.asarray, (ntil, b, sp12)))
    g = np.sqrt(ntil * sp12 * b)
    if np.any((g <= 0) & (ntil != 0)):
        raise ValueError("ntil * s'12 * b must be positive when ntil is nonzero")
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(ntil == 0, 0.0, ntil**2 / np.where(g > 0, g, 1.0))
    return np.sqrt(sp12) * (k1 * quad - k3 * g)


# physical forms ---------------------------------------------------------------

def physical_thrust(v_s, n_p, prop: PropellerModel):
    """rho D^4 K_T(J) n_p^2 written without dividing by n_p (valid at n_p = 0)."""
    va = (1.0 - prop.f_w) * np.asarray(v_s, dtype=float)
    n = np.asarray(n_p, dtype=float)
    r, D = prop.rho, prop.D_p
    return r * (prop.a_T0 * D**4 * n**2 - prop.a_T1 * D**3 * va * n - prop.a_T2 * D**2 * va**2)


def physical_torque(v_s, n_p, prop: PropellerModel):
    va = (1.0 - prop.f_w) * np.asarray(v_s, dtype=float)
    n = np.asarray(n_p, dtype=float)
    r, D = prop.rho, prop.D_p
    return r * (prop.a_Q0 * D**5 * n**2 - prop.a_Q1 * D**4 * va * n - prop.a_Q2 * D**3 * va**2)


def shaft_speed_for_thrust(T, v_s, prop: PropellerModel):
    """Smallest nonnegative n_p producing thrust T at speed v_s (nan if none)."""
    va = (1.0 - prop.f_w) * np.asarray(v_s, dtype=float)
    r, D = prop.rho, prop.D_p
    a = r * prop.a_T0 * D**4
    bq = -r * prop.a_T1 * D**3 * va
    c = -r * prop.a_T2 * D**2 * va**2 - np.asarray(T, dtype=float)
    disc = bq**2 - 4 * a * c
    with np.errstate(invalid="ignore"):
        n = (-bq + np.sqrt(disc)) / (2 * a)
    return np.where((disc >= 0) & (n >= 0), n, np.nan)


class TightnessCondition(NamedTuple):
    vacuous: bool
    holds: bool
    margin: float


def tightness_condition(prop: PropellerModel) -> TightnessCondition:
    """Propeller-coefficient condition guaranteeing a tight z relaxation.

    margin = a_Q1 a_T0/(a_Q0 a_T1) - a_Q2 a_T0^2/(a_Q0 a_T1^2) - 1; the condition
    holds when margin > 0. Vacuous for the reduced model, where z is not a free
    thrust variable.
    """
    if prop.a_T1 == 0.0:
        return TightnessCondition(True, True, float("inf"))
    margin = (
        prop.a_Q1 * prop.a_T0 / (prop.a_Q0 * prop.a_T1)
        - prop.a_Q2 * prop.a_T0**2 / (prop.a_Q0 * prop.a_T1**2)
        - 1.0
    )
    return TightnessCondition(False, margin > 0, float(margin))


# open-water data ---------------------------------------------------------------

@dataclass(frozen=True)
class WageningenTerms:
    """Polynomial terms C * J^S * (P/D)^t * (AE/A0)^u * Z^v for K_T and K_Q."""

    thrust: np.ndarray  # rows of (C, S, t, u, v)
    torque: np.ndarray
    Z: float
    AE_A0: float
    P_D: float
    name: str = ""


@dataclass(frozen=True)
class OpenWaterCurve:
    J: np.ndarray
    K_T: np.ndarray
    K_Q: np.ndarray
    terms: WageningenTerms | None = None

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.ndim != 1 or J.size < 3:
            raise ValueError("open-water curve needs at least 3 grid points")
        if np.any(np.diff(J) <= 0) or J[0] < 0:
            raise ValueError("J grid must be nonnegative and strictly increasing")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "K_T", np.asarray(self.K_T, dtype=float))
        object.__setattr__(self, "K_Q", np.asarray(self.K_Q, dtype=float))

    @classmethod
    def from_terms(cls, terms: WageningenTerms, points: int = 101, kt_floor: float = 0.05) -> "OpenWaterCurve":
        """Sample J from 0 up to where K_T first drops to ``kt_floor * K_T(0)``.

        Stopping short of the zero-thrust point keeps relative errors finite.
        """
        fine = np.linspace(0.0, 2.0, 4001)
        kt, _ = eval_wageningen(terms, fine)
        if kt[0] <= 0:
            raise ValueError("K_T(0) must be positive")
        neg = np.flatnonzero(kt <= kt_floor * kt[0])
        j_max = fine[neg[0]] if neg.size else fine[-1]
        J = np.linspace(0.0, j_max, points)
        kt, kq = eval_wageningen(terms, J)
        return cls(J, kt, kq, terms)

    @classmethod
    def from_model(cls, prop: PropellerModel, points: int = 101) -> "OpenWaterCurve":
        if prop.a_T1 == 0 and prop.a_T2 == 0:
            j_max = 1.0
        else:
            disc = prop.a_T1**2 + 4 * prop.a_T2 * prop.a_T0
            j_max = (-prop.a_T1 + np.sqrt(disc)) / (2 * prop.a_T2) if prop.a_T2 > 0 else prop.a_T0 / prop.a_T1
        J = np.linspace(0.0, j_max, points)
        return cls(J, prop.K_T(J), prop.K_Q(J))


def _term_sum(rows: np.ndarray, J, P_D, AE_A0, Z):
    J = np.asarray(J, dtype=float)
    if rows.size == 0:
        raise ValueError("missing polynomial terms")
    C, S, t, u, v = rows.T
    geo = C * P_D**t * AE_A0**u * Z**v
    return np.power.outer(J, S) @ geo


def eval_wageningen(terms: WageningenTerms | OpenWaterCurve, J):
    """Evaluate (K_T, K_Q) from polynomial terms at J (scalar or array)."""
    if isinstance(terms, OpenWaterCurve):
        if terms.terms is None:
            raise ValueError("curve carries no polynomial terms")
        terms = terms.terms
    kt = _term_sum(terms.thrust, J, terms.P_D, terms.AE_A0, terms.Z)
    kq = _term_sum(terms.torque, J, terms.P_D, terms.AE_A0, terms.Z)
    return kt, kq


def read_wageningen_csv(path: str | Path) -> list[WageningenTerms]:
    """Read one or more propellers from a term file.

    A geometry line ``# Z=4, AE_A0=0.55, P_D=0.9[, name=...]`` opens a new
    propeller; the data rows below it have columns target,C,S,t,u,v with target
    in {T, Q}. A single header row ``target,C,S,t,u,v`` may appear anywhere.
    """
    props: list[WageningenTerms] = []
    geo: dict | None = None
    rows: dict[str, list] = {"T": [], "Q": []}

    def flush():
        if geo is None:
            return
        if not rows["T"] or not rows["Q"]:
            raise ValueError(f"propeller {geo.get('name', len(props))!r} lacks T or Q terms")
        props.append(WageningenTerms(
            np.array(rows["T"], dtype=float), np.array(rows["Q"], dtype=float),
            float(geo["Z"]), float(geo["AE_A0"]), float(geo["P_D"]), str(geo.get("name", "")),
        ))

    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                flush()
                geo = {}
                for part in line.lstrip("#").split(","):
                    if "=" in part:
                        k, val = part.split("=", 1)
                        geo[k.strip()] = val.strip()
                missing = {"Z", "AE_A0", "P_D"} - geo.keys()
                if missing:
                    raise ValueError(f"line {lineno}: geometry header missing {sorted(missing)}")
                rows = {"T": [], "Q": []}
                continue
            cells = next(csv.reader([line]))
            if cells[0].strip().lower() == "target":
                continue
            if geo is None:
                raise ValueError(f"line {lineno}: term row before any geometry header")
            target = cells[0].strip().upper()
            if target not in rows or len(cells) != 6:
                raise ValueError(f"line {lineno}: expected target,C,S,t,u,v")
            rows[target].append([float(c) for c in cells[1:]])
    flush()
    if not props:
        raise ValueError("no propellers found")
    return props


def write_wageningen_csv(path: str | Path, props: Sequence[WageningenTerms]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for p in props:
            fh.write(f"# Z={p.Z:g}, AE_A0={p.AE_A0:g}, P_D={p.P_D:g}" + (f", name={p.name}" if p.name else "") + "\n")
            w.writerow(["target", "C", "S", "t", "u", "v"])
            for tgt, arr in (("T", p.thrust), ("Q", p.torque)):
                for r in arr:
                    w.writerow([tgt] + [repr(float(x)) for x in r])


# fitting ---------------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    """Average relative errors of fitted open-water curves against the source."""

    poly2: dict = field(default_factory=dict)   # keys: K_T, K_Q, eta_o
    linear: dict = field(default_factory=dict)
    poly3: dict = field(default_factory=dict)


def avg_relative_error(approx, exact) -> float:
    """Mean of |approx - exact| / |exact| over points where exact is nonzero."""
    approx, exact = np.asarray(approx), np.asarray(exact)
    mask = np.abs(exact) > 1e-12
    if not mask.any():
        return float(np.max(np.abs(approx - exact)))
    return float(np.mean(np.abs(approx[mask] - exact[mask]) / np.abs(exact[mask])))


def open_water_efficiency(J, K_T, K_Q):
    J, K_T, K_Q = map(np.asarray, (J, K_T, K_Q))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(K_Q > 0, K_T * J / (2 * np.pi * np.where(K_Q > 0, K_Q, 1.0)), 0.0)


def _fit_sign_constrained(J, y, w, linear_zero: bool):
    # y ~ a0 - a1 J - a2 J^2 with a0 >= 0, a1 >= 0, a2 >= 0
    cols = [np.ones_like(J), -J, -J**2]
    lb = [0.0, 0.0, 0.0]
    ub = [np.inf, np.inf, np.inf]
    if linear_zero:
        cols.pop(1), lb.pop(1), ub.pop(1)
    X = np.column_stack(cols) * w[:, None]
    res = lsq_linear(X, y * w, bounds=(lb, ub), method="bvls", tol=1e-14, lsmr_tol="auto")
    if not res.success:
        raise FitError(f"sign-constrained fit failed: {res.message}")
    coef = res.x
    if linear_zero:
        coef = np.array([coef[0], 0.0, coef[1]])
    if coef[0] <= 0:
        raise FitError("fitted intercept a0 is not positive; K(0) must be > 0")
    return coef


def _polyfit(J, y, w, deg):
    return np.polynomial.polynomial.polyfit(J, y, deg, w=w)


def fit_poly2(
    curve: OpenWaterCurve,
    constrain_linear_zero: bool = False,
    *,
    D_p: float = 1.0,
    f_w: float = 0.0,
    k_p: int = 1,
    rho: float = 997.0,
    J_design: float | None = None,
    weight_width: float = 0.2,
) -> tuple[PropellerModel, FitReport]:
    """Least-squares poly2 fit of K_T and K_Q with the convexity sign pattern.

    Linear and cubic unconstrained fits are computed alongside for comparison.
    An optional Gaussian weight centered at ``J_design`` emphasizes the
    operating point.
    """
    J, kt, kq = curve.J, curve.K_T, curve.K_Q
    if kt[0] <= 0:
        raise FitError("K_T(0) must be positive")
    w = np.ones_like(J)
    if J_design is not None:
        w = np.sqrt(np.exp(-0.5 * ((J - J_design) / weight_width) ** 2))

    ct = _fit_sign_constrained(J, kt, w, constrain_linear_zero)
    cq = _fit_sign_constrained(J, kq, w, constrain_linear_zero)
    model = PropellerModel(
        D_p=D_p, f_w=f_w, a_T0=ct[0], a_T1=ct[1], a_T2=ct[2],
        a_Q0=cq[0], a_Q1=cq[1], a_Q2=cq[2], k_p=k_p, rho=rho,
    )
    eta = open_water_efficiency(J, kt, kq)

    def errors(kt_fit, kq_fit):
        return {
            "K_T": avg_relative_error(kt_fit, kt),
            "K_Q": avg_relative_error(kq_fit, kq),
            "eta_o": avg_relative_error(open_water_efficiency(J, kt_fit, kq_fit), eta),
        }

    pv = np.polynomial.polynomial.polyval
    report = FitReport(
        poly2=errors(model.K_T(J), model.K_Q(J)),
        linear=errors(pv(J, _polyfit(J, kt, w, 1)), pv(J, _polyfit(J, kq, w, 1))),
        poly3=errors(pv(J, _polyfit(J, kt, w, 3)), pv(J, _polyfit(J, kq, w, 3))),
    )
    return model, report
