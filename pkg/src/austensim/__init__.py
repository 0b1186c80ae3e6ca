"""Level-set / diffuse-interface simulation of austenite decomposition."""

__version__ = "0.1.0"

from .grid import Grid, ScalarField, VectorField, gradient, laplacian, unit_normal
from .thermo import (
    ArrheniusLaw,
    CoolingSchedule,
    InterfaceProperties,
    LinearizedPhaseDiagram,
    MaterialData,
    ReferenceState,
)
from .levelset import GrainRecord, LevelSetEnsemble, junction_repair, reinitialize
from .diffusion import DiffusionCoefficients, MassAudit, assemble_cdr, step_concentration
from .kinetics import StoredEnergyInput, VelocityAssembly, transport_step
from .oracle import OracleState, advance, initial_state, solve_interface_concentration
from .config import Scenario, parse_material, parse_scenario
from .simulation import RunReport, equilibrium_report, run_oracle, run_simulation

__all__ = [
    "Grid", "ScalarField", "VectorField", "gradient", "laplacian", "unit_normal",
    "ArrheniusLaw", "CoolingSchedule", "InterfaceProperties", "LinearizedPhaseDiagram",
    "MaterialData", "ReferenceState",
    "GrainRecord", "LevelSetEnsemble", "junction_repair", "reinitialize",
    "DiffusionCoefficients", "MassAudit", "assemble_cdr", "step_concentration",
    "StoredEnergyInput", "VelocityAssembly", "transport_step",
    "OracleState", "advance", "initial_state", "solve_interface_concentration",
    "Scenario", "parse_material", "parse_scenario",
    "RunReport", "equilibrium_report", "run_oracle", "run_simulation",
]
