"""hp-adaptive finite elements for cracks in density-dependent solids."""

from .material import (
    MaterialParams,
    SymTensor2,
    default_material,
    from_young_poisson,
)
from .mesh import RefinementFlags, SlitQuadMesh, build_initial_mesh, refine
from .fespace import (
    ConstraintSet,
    FeFunction,
    HpSpace,
    build_constraints,
    distribute_dofs,
    evaluate,
    transfer,
    zero_function,
)
from .assembly import LoadSpec, assemble_residual, assemble_tangent
from .solver import NewtonReport, NewtonSettings, NonlinearProblem, newton_solve, solve_linear
from .adaptivity import CellIndicators, adapt_cycle, kelly_indicators, legendre_smoothness, mark
from .scenarios import ScenarioConfig, crack_jump, ligament_extract, setup
from .driver import RunRecord, fit_rate, run, sweep_beta

__version__ = "0.1.0"

__all__ = [
    "MaterialParams",
    "SymTensor2",
    "default_material",
    "from_young_poisson",
    "RefinementFlags",
    "SlitQuadMesh",
    "build_initial_mesh",
    "refine",
    "ConstraintSet",
    "FeFunction",
    "HpSpace",
    "build_constraints",
    "distribute_dofs",
    "evaluate",
    "transfer",
    "zero_function",
    "LoadSpec",
    "assemble_residual",
    "assemble_tangent",
    "NewtonReport",
    "NewtonSettings",
    "NonlinearProblem",
    "newton_solve",
    "solve_linear",
    "CellIndicators",
    "adapt_cycle",
    "kelly_indicators",
    "legendre_smoothness",
    "mark",
    "ScenarioConfig",
    "crack_jump",
    "ligament_extract",
    "setup",
    "RunRecord",
    "fit_rate",
    "run",
    "sweep_beta",
]
