"""Optimal therapy scheduling for a chemotaxis tumor-oxygen model.

P1 finite-element forward and costate solvers, a budget-constrained control
set, and a projected Adam descent loop, plus an experiment runner emitting
CSV series, VTK snapshots, and rendered figures.
"""
from .adjoint import AdjointTrajectory, run_adjoint, step_adjoint_backward, terminal_adjoint
from .control import (AdmissibleSet, ControlSchedule, clamp_box,
                      evaluate_budget, project_budget)
from .cost import (CostWeights, duality_pairing, evaluate_cost,
                   fd_gradient_oracle, reduced_gradient)
from .errors import (ConfigError, MeshFormatError, MeshValidationError,
                     NumericError, OptimizationError, RunnerError,
                     SolverError, SteppingError, TumoroptError)
from .fem import (assemble_convection, assemble_mass, assemble_stiffness,
                  assemble_weighted_mass, element_gradients, l2_project,
                  load_vector, quad_values, solve_sparse, triple_product)
from .mesh import Mesh, element_geometry, generate_unit_square, load_mesh
from .model import (ModelParams, initial_oxygen, initial_tumor,
                    oxygen_profile, rho, rho_prime, tumor_profile)
from .optimize import (AdamConfig, AdamState, ControlProblem, IterationRecord,
                       OptimizeResult, adam_direction, optimize)
from .sensitivity import SensitivityTrajectory, run_sensitivity
from .state import (StateTrajectory, StepContext, TimeGrid, run_state,
                    step_state)

__version__ = "0.1.0"
