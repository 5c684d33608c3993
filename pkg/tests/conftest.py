"""Shared fixtures. Heavy solves are session-scoped and reused across modules."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from shipplan.ocp import Mission, build_program, plan, solve
from shipplan.path import PathSpec, sample_path
from shipplan.scenario import parse_scenario

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def baseline():
    return parse_scenario("table1_baseline")


@pytest.fixture(scope="session")
def baseline_path(baseline):
    return baseline.samples()


@pytest.fixture(scope="session")
def baseline_program(baseline, baseline_path):
    return build_program(baseline_path, baseline.models, baseline.mission)


@pytest.fixture(scope="session")
def baseline_ipm(baseline_program):
    """Single solve of the baseline with the bundled interior-point method."""
    return solve(baseline_program, "ipm", tol=1e-8)


@pytest.fixture(scope="session")
def baseline_clarabel(baseline_program):
    return solve(baseline_program, "clarabel", tol=1e-8)


@pytest.fixture(scope="session")
def baseline_plan(baseline, baseline_path):
    """Baseline with one friction refinement pass (the scenario default)."""
    return plan(baseline_path, baseline.models, baseline.mission, "clarabel", baseline.tol, baseline.friction_passes)


@pytest.fixture(scope="session")
def battery_plan():
    sc = parse_scenario("battery_legs")
    return sc, plan(sc.samples(), sc.models, sc.mission, "ipm", sc.tol, sc.friction_passes)


def straight_path(length: float, N: int, count: int = 5):
    pts = np.column_stack([np.linspace(0.0, length, count), np.zeros(count)])
    return sample_path(PathSpec(pts), N)


@pytest.fixture(scope="session")
def no_battery_models(baseline):
    m = baseline.models
    return replace(m, batt=replace(m.batt, P_cha_max=0.0, P_dis_max=0.0))


@pytest.fixture(scope="session")
def small_straight(no_battery_models):
    """Straight 60 m path, 60 intervals, no battery use."""
    path = straight_path(60.0, 60)
    mission = Mission(v_init=1.0, v_final=1.0, omega_T=2.0, P_aux=1.0, N=60)
    return path, no_battery_models, mission
