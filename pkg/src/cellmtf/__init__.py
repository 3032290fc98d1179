"""Boundary-integral simulation of electropermeabilization for spherical cells."""

from .dynamics import MembraneParams, MembraneState, TimeGrid, run
from .mtf import MtfSystem, TraceBlock, assemble_mtf
from .scenario import (
    Scenario,
    ScenarioError,
    apply_override,
    load_scenario,
    scenario_from_dict,
)
from .simulate import (
    load_checkpoint,
    run_scenario,
    system_from_scenario,
    write_checkpoint,
)
from .study import StudyReport, run_convergence_study

__version__ = "0.1.0"

__all__ = [
    "MembraneParams",
    "MembraneState",
    "TimeGrid",
    "run",
    "MtfSystem",
    "TraceBlock",
    "assemble_mtf",
    "Scenario",
    "ScenarioError",
    "apply_override",
    "load_scenario",
    "scenario_from_dict",
    "run_scenario",
    "system_from_scenario",
    "write_checkpoint",
    "load_checkpoint",
    "StudyReport",
    "run_convergence_study",
    "__version__",
]
