"""Optimal linear incentive contracts for teams of disclosing agents.

The principal's problem reduces to maximising a concave quadratic ``f`` in
the contract sensitivities; this package solves it several independent
ways, studies its limits in the principal's risk aversion, builds the
resulting contract and checks the induced equilibrium by simulation.
"""

from .constrained import (
    ConstrainedSolution,
    diag_sign_test,
    m_matrix_diagnostics,
    mixed_sign_check,
    penalty_convergence_study,
    solve_explicit_column,
    solve_kkt,
)
from .contract import (
    ContractCoefficients,
    PathBundle,
    agent_certainty_equivalents,
    contract_coefficients,
    nash_deviation_check,
    optimal_actions,
    principal_value,
    simulate_paths,
)
from .experiments import SweepResult, flip_threshold, sweep
from .foc_solver import SolverError, brute_force_maximize, solve, solve_closed_form, solve_direct
from .homogeneous import closed_form_homogeneous, gp0_homogeneous, gp_infinity_limits, n1_benchmark
from .objective import FocSystem, Sensitivities, eval_f, eval_f_decomposed, gradient, hessian_blocks
from .params import ModelParams, ParamsError, homogeneous_params, load_config, preset, validate
from .row_decoupled import gp0_heterogeneous, persistence_scan, sign_pattern

__version__ = "0.1.0"
