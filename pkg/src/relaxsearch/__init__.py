"""Relax-and-search primal heuristics for mixed binary quadratic programs."""

from .core import (
    EQ, FEAS_TOL, GE, INT_TOL, LE, Deadline, FeasibilityReport, Problem, ProblemError, Solution,
    SolveStatus, check_feasibility, eval_objective, fix_variables, make_problem, relax_integrality,
    snap_binaries,
)
from .cover import (
    Cover, HessianGraph, build_hessian_graph, greedy_matching_cover, min_vertex_cover,
    residual_hessian_graph,
)
from .heuristics import (
    METHODS, HeuristicConfig, HeuristicResult, bnb_method, cover_relax_search, relax_search,
    rens_baseline, select_fix_set, undercover_baseline,
)
from .instgen import GenSpec, gen_h_matrix, gen_instance, gen_suite
from .metrics import compile_best_known, primal_gap, primal_integral
from .reformulate import LinearizedProblem, mccormick_linearize, recover_binary_point
from .relax import (
    NlpMode, RelaxationSolution, lp_minimize, solve_lp_relaxation, solve_nlp_relaxation,
)
from .subsolve import BnbConfig, BnbResult, IncumbentTrace, branch_and_bound, brute_force
from .wflop import (
    Grid, WakeParams, WflopSpec, WindScenario, build_wflop_problem, make_grid, sample_scenarios,
    wake_deficit,
)

__version__ = "0.1.0"
