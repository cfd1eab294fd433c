"""Poisoning attacks on l1-regularized feature selection.

Interior-point solvers for the lasso family (lasso, group lasso, sparse
group lasso), implicit-function-theorem gradients of the fitted
coefficients with respect to the training data, exact norm-ball
projections, a projected-gradient data-poisoning attack that steers which
features get selected, and scenario runners with a CLI.
"""

from .attack import (
    AttackConfig,
    AttackResult,
    StepSchedule,
    convergence_check,
    run_attack,
    step_size,
)
from .errors import ConvergenceError, InteriorViolationError, SensitivityError
from .gradients import (
    KktJacobian,
    SolutionSensitivity,
    assemble_jacobian,
    attack_gradients,
    grad_attack_objective,
    grad_beta_wrt_X,
    grad_beta_wrt_y,
    solution_sensitivity,
)
from .model import (
    AttackObjective,
    AttackTarget,
    Budget,
    Dataset,
    GroupPartition,
    ModelSpec,
    compile_objective,
    load_dataset,
    objective_value,
    save_dataset,
)
from .projections import norm_value, project_ball, project_l1, project_l2, project_linf
from .reference import bcd_group_lasso, cd_lasso, fista_sparse_group, project_l1_sort
from .scenarios import (
    SUPPORT_TOL,
    DoaScene,
    ScenarioReport,
    build_doa,
    gen_grouped_synthetic,
    gen_synthetic,
    load_scenario_config,
    metrics,
    run_scenario,
    select_targets,
)
from .solvers import (
    BarrierConfig,
    SolverSolution,
    kkt_residual,
    lambda_max,
    penalized_objective,
    solve_group_lasso,
    solve_lasso,
    solve_model,
    solve_sparse_group_lasso,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackObjective",
    "AttackResult",
    "AttackTarget",
    "BarrierConfig",
    "Budget",
    "ConvergenceError",
    "Dataset",
    "DoaScene",
    "GroupPartition",
    "InteriorViolationError",
    "KktJacobian",
    "ModelSpec",
    "ScenarioReport",
    "SensitivityError",
    "SolutionSensitivity",
    "SolverSolution",
    "StepSchedule",
    "SUPPORT_TOL",
    "assemble_jacobian",
    "attack_gradients",
    "bcd_group_lasso",
    "build_doa",
    "cd_lasso",
    "compile_objective",
    "convergence_check",
    "fista_sparse_group",
    "gen_grouped_synthetic",
    "gen_synthetic",
    "grad_attack_objective",
    "grad_beta_wrt_X",
    "grad_beta_wrt_y",
    "kkt_residual",
    "lambda_max",
    "load_dataset",
    "load_scenario_config",
    "metrics",
    "norm_value",
    "objective_value",
    "penalized_objective",
    "project_ball",
    "project_l1",
    "project_l1_sort",
    "project_l2",
    "project_linf",
    "run_attack",
    "run_scenario",
    "save_dataset",
    "select_targets",
    "solution_sensitivity",
    "solve_group_lasso",
    "solve_lasso",
    "solve_model",
    "solve_sparse_group_lasso",
    "step_size",
    "__version__",
]
