"""Speed trajectory and power-split planning for hybrid electric vessels."""

from .ocp import Mission, PlanSolution, build_program, pareto_sweep, plan, solve
from .path import PathSamples, PathSpec, sample_path
from .powertrain import ShipModels
from .scenario import Scenario, ScenarioError, parse_scenario

__all__ = [
    "Mission", "PathSamples", "PathSpec", "PlanSolution", "Scenario", "ScenarioError", "ShipModels",
    "build_program", "pareto_sweep", "parse_scenario", "plan", "sample_path", "solve",
]
