"""Command-line interface: plan, sweep, sim, fit and genpath.

Exit codes: 0 success, 1 input error, 2 infeasible, 3 solver numerical limit
(also used for unbounded problems, which indicate a modelling error).
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .backends import BACKENDS
from .ipm import INFEASIBLE, OPTIMAL
from .ocp import MissionError, PlanSolution, pareto_sweep, plan
from .path import PathError, random_control_points
from .propeller import FitError, OpenWaterCurve, fit_poly2, read_wageningen_csv
from .scenario import Scenario, ScenarioError, load_raw, parse_scenario
from . import sim as simulation

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3

SOLUTION_COLUMNS = (
    "sigma", "x", "y", "theta", "v", "b", "T_p", "F_D", "F_H", "F_P", "F_R", "D_R", "n_p", "F_c", "k_c",
    "F_bat", "F_batd", "F_dEp", "dE_bat", "y_t", "z", "ntil", "res_time", "res_shaft", "res_balance",
)
NODE_FIELDS = {"sigma", "x", "y", "theta", "v", "b", "dE_bat"}


def status_exit_code(status: str) -> int:
    if status == OPTIMAL:
        return EXIT_OK
    if status == INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_NUMERICAL


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return f"{float(x):.12g}"


def _load(scenario_arg, scenario_opt, nodes) -> Scenario:
    source = scenario_opt or scenario_arg
    if source is None:
        raise click.UsageError("give a scenario file (positional or --scenario)")
    sc = parse_scenario(source)
    if nodes is not None:
        sc = replace(sc, mission=replace(sc.mission, N=int(nodes)))
    return sc


def _out_dir(sc: Scenario, out: str | None) -> Path:
    d = Path(out) if out else sc.output_dir
    d.mkdir(parents=True, exist_ok=True)
    return d


def solution_rows(sol: PlanSolution) -> list[dict]:
    N = sol.sigma.size - 1
    c = sol.controls
    tr = sol.tightness
    node = {"sigma": sol.sigma, "x": sol.x, "y": sol.y, "theta": sol.theta, "v": sol.v, "b": sol.b, "dE_bat": sol.dE}
    ctrl = {k: c[k] for k in ("T_p", "F_D", "F_H", "F_P", "F_R", "D_R", "n_p", "F_c", "F_bat", "F_batd",
                              "F_dEp", "y_t", "z", "ntil")}
    ctrl["k_c"] = sol.k_c.astype(float)
    if tr is not None:
        ctrl["res_time"], ctrl["res_shaft"], ctrl["res_balance"] = tr.time_residual, tr.shaft_residual, tr.balance_residual
    rows = []
    for i in range(N + 1):
        row = {}
        for col in SOLUTION_COLUMNS:
            if col in NODE_FIELDS:
                row[col] = node[col][i]
            elif i < N and col in ctrl:
                row[col] = ctrl[col][i]
            else:
                row[col] = None
        rows.append(row)
    return rows


def write_solution_csv(path: Path, sol: PlanSolution) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SOLUTION_COLUMNS)
        for row in solution_rows(sol):
            w.writerow([_fmt(row[c]) for c in SOLUTION_COLUMNS])
        fh.write(f"# summary,status={sol.status},time={_fmt(sol.time)},fuel={_fmt(sol.fuel)},"
                 f"objective={_fmt(sol.objective)},solve_time={sol.solve_time:.6f}\n")


def plan_summary(sc: Scenario, sol: PlanSolution) -> dict:
    out = {
        "scenario": sc.name,
        "seed": sc.seed,
        "backend": sol.backend,
        "status": sol.status,
        "nodes": int(sol.sigma.size - 1),
        "objective": sol.objective,
        "fuel_mg": sol.fuel,
        "time_s": sol.time,
        "time_exact_s": sol.time_exact,
        "converter": {"a_c0": sc.models.conv.a_c0, "a_c1": sc.models.conv.a_c1},
        "solve_time_s": sol.solve_time,
        "total_time_s": sol.info.get("total_time"),
        "iterations": sol.iterations,
    }
    if sol.tightness is not None:
        out["tightness"] = sol.tightness.summary()
    return _clean(out)


def _clean(o):
    """Plain JSON values; non-finite floats become null."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        return float(o) if np.isfinite(o) else None
    return o


def _write_json(path: Path, data: dict) -> None:
    text = json.dumps(_clean(data), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


scenario_option = click.option("--scenario", "scenario_opt", default=None, help="Scenario JSON file or bundled name.")
out_option = click.option("--out", default=None, help="Output directory (default: the scenario's).")
backend_option = click.option("--backend", type=click.Choice(BACKENDS), default=None,
                              help="Cone solver; overrides the scenario and SHIPPLAN_BACKEND.")
tol_option = click.option("--tol", type=float, default=None, help="Solver tolerance.")
nodes_option = click.option("--nodes", type=click.IntRange(2), default=None, help="Number of path intervals N.")


@click.group()
def cli():
    """Speed and power-split planning for hybrid electric vessels."""


@cli.command("plan")
@click.argument("scenario", required=False)
@scenario_option
@out_option
@backend_option
@tol_option
@nodes_option
@click.option("--friction-passes", type=click.IntRange(0), default=None,
              help="Re-solves with friction evaluated at the planned speeds.")
def plan_cmd(scenario, scenario_opt, out, backend, tol, nodes, friction_passes):
    """Solve one scenario; write <name>_solution.csv and <name>_summary.json."""
    sc = _load(scenario, scenario_opt, nodes)
    sol = plan(sc.samples(), sc.models, sc.mission, backend or sc.backend, tol or sc.tol,
               sc.friction_passes if friction_passes is None else friction_passes)
    d = _out_dir(sc, out)
    write_solution_csv(d / f"{sc.name}_solution.csv", sol)
    summary = plan_summary(sc, sol)
    _write_json(d / f"{sc.name}_summary.json", summary)
    click.echo(f"{sc.name}: {sol.status}  time={sol.time:.3f} s  fuel={sol.fuel:.3f} mg  "
               f"solve={sol.solve_time:.3f} s ({sol.backend})")
    return status_exit_code(sol.status)


@cli.command("sweep")
@click.argument("scenario", required=False)
@scenario_option
@out_option
@backend_option
@tol_option
@nodes_option
@click.option("--weights", default="10,3.33,2,1.25,0.83", show_default=True,
              help="Comma-separated time weights.")
@click.option("--converter-power", "powers", multiple=True, type=float,
              help="Converter rated power in W; repeat for several curves.")
@click.option("--workers", type=click.IntRange(1), default=1, show_default=True,
              help="Parallel solver processes.")
def sweep_cmd(scenario, scenario_opt, out, backend, tol, nodes, weights, powers, workers):
    """Pareto sweep over time weights; writes <name>_pareto[_<P>W].csv."""
    sc = _load(scenario, scenario_opt, nodes)
    try:
        wts = [float(x) for x in weights.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"cannot parse weights {weights!r}") from None
    if not wts or any(x < 0 for x in wts):
        raise click.BadParameter("weights must be nonnegative numbers")
    d = _out_dir(sc, out)
    code = EXIT_OK
    variants = [(None, sc.models)] if not powers else [(p, replace(sc.models, conv=sc.models.conv.scaled(p))) for p in powers]
    for p, models in variants:
        pts = pareto_sweep(sc.samples(), models, sc.mission, wts, backend or sc.backend, tol or sc.tol,
                           sc.friction_passes, workers)
        name = f"{sc.name}_pareto.csv" if p is None else f"{sc.name}_pareto_{p:g}W.csv"
        with open(d / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["weight", "time", "fuel", "status"])
            for pt in pts:
                w.writerow([_fmt(pt.weight), _fmt(pt.time), _fmt(pt.fuel), pt.status])
                code = max(code, status_exit_code(pt.status))
        click.echo(f"wrote {d / name} ({len(pts)} points)")
    return code


@cli.command("sim")
@click.argument("scenario", required=False)
@scenario_option
@out_option
@backend_option
@nodes_option
@click.option("--zigzag", "angle", type=float, default=20.0, show_default=True, help="Zig-zag rudder angle in degrees.")
@click.option("--v0", type=float, default=None, help="Initial speed in m/s (default: mission v_init).")
@click.option("--h", "step", type=float, default=0.01, show_default=True, help="RK2 step in s.")
@click.option("--t-end", type=float, default=120.0, show_default=True, help="Zig-zag duration in s.")
@click.option("--resim", is_flag=True, help="Plan the scenario and re-simulate it instead of a zig-zag.")
def sim_cmd(scenario, scenario_opt, out, backend, nodes, angle, v0, step, t_end, resim):
    """Zig-zag manoeuvre or plan re-simulation; writes a time-history CSV."""
    sc = _load(scenario, scenario_opt, nodes)
    d = _out_dir(sc, out)
    if resim:
        sol = plan(sc.samples(), sc.models, sc.mission, backend or sc.backend, sc.tol, sc.friction_passes)
        if not sol.optimal:
            click.echo(f"{sc.name}: plan {sol.status}; nothing to simulate", err=True)
            return status_exit_code(sol.status)
        r = simulation.resimulate_plan(sol, sc.path_spec, sc.models, h=step)
        path = d / f"{sc.name}_resim.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "sigma", "v", "n_p", "beta_deg", "rudder_deg"])
            for row in zip(r.t, r.sigma, r.v, r.n_p, np.rad2deg(r.beta), np.rad2deg(r.rudder)):
                w.writerow([_fmt(x) for x in row])
        summary = {
            "scenario": sc.name, "completed": r.completed, "voyage_time_s": r.voyage_time,
            "planned_time_s": sol.time_exact, "rms_relative_speed_deviation": r.rms_relative_deviation,
            "drift_flags": r.drift_flags, "rudder_flags": r.rudder_flags,
        }
        _write_json(d / f"{sc.name}_resim_summary.json", summary)
        click.echo(f"{sc.name}: re-simulated, RMS speed deviation {100 * r.rms_relative_deviation:.3f}%")
        return EXIT_OK
    hist = simulation.run_zigzag(sc.models, angle, v0=v0 if v0 is not None else sc.mission.v_init,
                                 h=step, t_end=t_end)
    path = d / f"{sc.name}_zigzag.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "theta", "theta_dot", "v", "rudder_deg", "n_p"])
        for row in zip(hist.t, hist.x, hist.y, hist.theta, hist.thetad, hist.speed, np.rad2deg(hist.rudder), hist.n_p):
            w.writerow([_fmt(x) for x in row])
    for msg, count in hist.warnings.items():
        click.echo(f"warning: {msg} ({count} steps)", err=True)
    click.echo(f"wrote {path}")
    return EXIT_OK


@cli.command("fit")
@click.argument("file")
@click.option("--out", default=None, help="Report CSV path (default: stdout).")
@click.option("--constrain-linear-zero", is_flag=True, help="Force a_T1 = a_Q1 = 0.")
@click.option("--j-design", type=float, default=None, help="Emphasize fits around this advance ratio.")
def fit_cmd(file, out, constrain_linear_zero, j_design):
    """Fit poly2 open-water models to every propeller in a term file."""
    props = read_wageningen_csv(file)
    header = ["propeller", "a_T0", "a_T1", "a_T2", "a_Q0", "a_Q1", "a_Q2"]
    header += [f"{m}_{k}" for m in ("poly2", "linear", "poly3") for k in ("K_T", "K_Q", "eta_o")]
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, p in enumerate(props):
            model, rep = fit_poly2(OpenWaterCurve.from_terms(p), constrain_linear_zero, J_design=j_design)
            row = [p.name or str(i), model.a_T0, model.a_T1, model.a_T2, model.a_Q0, model.a_Q1, model.a_Q2]
            row += [getattr(rep, m)[k] for m in ("poly2", "linear", "poly3") for k in ("K_T", "K_Q", "eta_o")]
            w.writerow([row[0]] + [_fmt(x) for x in row[1:]])
    finally:
        if out:
            fh.close()
    return EXIT_OK


@cli.command("genpath")
@click.option("--seed", type=int, required=True, help="Random seed.")
@click.option("--count", type=click.IntRange(5), default=40, show_default=True, help="Number of control points.")
@click.option("--template", default=None, help="Scenario to copy; the output is then a full scenario.")
@click.option("--out", default=None, help="Output JSON path (default: stdout).")
def genpath_cmd(seed, count, template, out):
    """Random control points for reproducible test paths."""
    pts = random_control_points(seed, count)
    path_doc = {"seed": seed, "count": count, "control_points": [[round(float(a), 6), round(float(b), 6)] for a, b in pts]}
    if template:
        doc = load_raw(template)
        doc["path"] = path_doc
        doc["name"] = f"{doc.get('name', 'scenario')}_seed{seed}"
    else:
        doc = path_doc
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    return EXIT_OK


def main(argv=None) -> int:
    """Entry point; maps errors to exit codes instead of click's defaults."""
    try:
        code = cli.main(args=argv, prog_name="shipplan", standalone_mode=False)
    except click.exceptions.Exit as e:
        code = e.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        code = EXIT_INPUT
    except click.ClickException as e:
        e.show()
        code = EXIT_INPUT
    except (ScenarioError, MissionError, PathError, FitError, ValueError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        code = EXIT_INPUT
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
