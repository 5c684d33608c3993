"""Solver backends for the standard-form cone program."""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .conic import StandardForm
from .ipm import INFEASIBLE, NUMERICAL, OPTIMAL, UNBOUNDED, IPMResult, solve_socp

BACKEND_ENV = "SHIPPLAN_BACKEND"
BACKENDS = ("ipm", "clarabel")


def resolve_backend(name: str | None) -> str:
    """Explicit name wins, then the environment override, then the bundled solver."""
    chosen = name or os.environ.get(BACKEND_ENV) or "ipm"
    if chosen not in BACKENDS:
        raise ValueError(f"unknown backend {chosen!r}; choose from {', '.join(BACKENDS)}")
    return chosen


def solve_standard(sf: StandardForm, backend: str = "ipm", tol: float = 1e-8, verbose: bool = False) -> IPMResult:
    if backend == "ipm":
        return solve_socp(sf.c, sf.A, sf.b, sf.G, sf.h, sf.l, sf.q,
                          feastol=tol, abstol=tol, reltol=tol, verbose=verbose)
    if backend == "clarabel":
        return _solve_clarabel(sf, tol, verbose)
    raise ValueError(f"unknown backend {backend!r}")


def _solve_clarabel(sf: StandardForm, tol: float, verbose: bool) -> IPMResult:
    import clarabel

    n = sf.c.size
    p = sf.A.shape[0]
    M = sp.vstack([sf.A, sf.G]).tocsc()
    rhs = np.concatenate([sf.b, sf.h])
    cones = []
    if p:
        cones.append(clarabel.ZeroConeT(p))
    if sf.l:
        cones.append(clarabel.NonnegativeConeT(sf.l))
    cones += [clarabel.SecondOrderConeT(d) for d in sf.q]
    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_infeas_abs = tol
    settings.tol_infeas_rel = tol
    settings.presolve_enable = False
    P = sp.csc_matrix((n, n))
    sol = clarabel.DefaultSolver(P, sf.c, M, rhs, cones, settings).solve()
    status_map = {
        "Solved": OPTIMAL,
        "PrimalInfeasible": INFEASIBLE,
        "DualInfeasible": UNBOUNDED,
    }
    name = str(sol.status).split(".")[-1]
    status = status_map.get(name, NUMERICAL)
    info = {"clarabel_status": str(sol.status), "solve_time": float(sol.solve_time)}
    if name == "AlmostSolved":
        status = OPTIMAL
        info["reduced_accuracy"] = True
    x = np.asarray(sol.x)
    zz = np.asarray(sol.z)
    s = np.asarray(sol.s)
    return IPMResult(
        status, x, zz[:p], zz[p:], s[p:], int(sol.iterations),
        float(sol.obj_val), float(getattr(sol, "obj_val_dual", np.nan)),
        info,
    )
