"""Rounding-based start heuristics sharing one relax / fix / subsolve pipeline.

``relax_search`` and ``cover_relax_search`` take a time-capped (possibly
suboptimal) relaxation point, fix only the fraction ``p`` of candidates whose
relaxation values are closest to integral, and search the rest with
branch-and-bound.  ``rens_baseline`` and ``undercover_baseline`` insist on a
finished relaxation and fix everything their rule allows, then keep
branching on the full problem from the solution they found.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import (
    INT_TOL, Deadline, Problem, Solution, SolveStatus, check_feasibility, eval_objective,
    fix_variables, snap_binaries,
)
from .cover import min_vertex_cover, build_hessian_graph
from .relax import NlpMode, RelaxationSolution, solve_lp_relaxation, solve_nlp_relaxation
from .subsolve import BnbConfig, IncumbentTrace, branch_and_bound

log = logging.getLogger(__name__)

RELAXATION_FAILED = "RelaxationFailed"
SUBPROBLEM_INFEASIBLE = "SubproblemInfeasible"
SUBPROBLEM_TIMEOUT = "SubproblemTimeout"

BASE_HORIZON = 60.0
BASE_RELAX_LIMIT = 20.0
BASE_COVER_LIMIT = 1.0


@dataclass(frozen=True)
class HeuristicConfig:
    """Budgets in seconds.  ``relax_limit`` and ``cover_limit`` default to
    20 s and 1 s of a 60 s run, scaled to ``total_limit``.

    ``nlp_mode`` picks the relaxation point of the capped methods (see
    :class:`~relaxsearch.relax.NlpMode`); ``tie_break`` orders candidates of
    equal ``|x_i - 0.5|``.  ``node_limit`` caps every branch-and-bound call by
    node count, which makes a truncated run independent of machine speed.
    """

    p: float = 0.7
    total_limit: float = 60.0
    relax_limit: float | None = None
    cover_limit: float | None = None
    relaxation: str = "NLP"
    seed: int = 0
    subsolve_reserve: float = 5.0
    nlp_mode: str = "FirstLocal"
    tie_break: str = "flip_cost"
    node_limit: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.relaxation not in ("LP", "NLP"):
            raise ValueError("relaxation must be 'LP' or 'NLP'")
        NlpMode(self.nlp_mode)
        if self.tie_break not in ("flip_cost", "index"):
            raise ValueError("tie_break must be 'flip_cost' or 'index'")
        if self.total_limit <= 0:
            raise ValueError("total_limit must be positive")
        if self.T_r + self.T_c >= self.total_limit:
            raise ValueError("relaxation and cover budgets must leave time for the subsolve")

    @property
    def T_r(self) -> float:
        if self.relax_limit is not None:
            return self.relax_limit
        return BASE_RELAX_LIMIT * self.total_limit / BASE_HORIZON

    @property
    def reserve(self) -> float:
        """Subsolve time the baselines keep back from their relaxation:
        ``subsolve_reserve``, but never more than half the run."""
        return min(self.subsolve_reserve, 0.5 * self.total_limit)

    @property
    def T_c(self) -> float:
        if self.cover_limit is not None:
            return self.cover_limit
        return BASE_COVER_LIMIT * self.total_limit / BASE_HORIZON


@dataclass
class HeuristicResult:
    method: str
    solution: Solution | None
    trace: IncumbentTrace
    phase_times: dict[str, float] = field(default_factory=lambda: {"relax": 0.0, "cover": 0.0, "subsolve": 0.0})
    fixed_set: tuple[int, ...] = ()
    failure_reason: str | None = None
    relaxation_status: SolveStatus | None = None
    subsolve_status: SolveStatus | None = None

    @property
    def objective(self) -> float | None:
        return self.solution.objective if self.solution is not None else None


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def select_fix_set(x_bar, candidates: Iterable[int], p: float,
                   tie_scores=None) -> tuple[int, ...]:
    """The ``floor(|candidates| * p)`` candidates with the largest ``|x_i - 0.5|``.

    Equal distances are ordered by ``tie_scores`` (larger first) when given,
    then by lower index.  The result is ordered by rank.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    cand = sorted(int(i) for i in candidates)
    # guard against p * |U| landing a hair below an integer
    k = int(math.floor(len(cand) * p + 1e-9))
    # distances rounded so float noise does not break ties
    delta = np.round(np.abs(x_bar - 0.5), 12)
    if tie_scores is None:
        ranked = sorted(cand, key=lambda i: (-delta[i], i))
    else:
        ranked = sorted(cand, key=lambda i: (-delta[i], -tie_scores[i], i))
    return tuple(ranked[:k])


def flip_costs(problem: Problem, x_bar) -> np.ndarray:
    """Objective change from flipping each binary of the rounded ``x_bar``.

    A large value means the objective strongly supports the rounded value,
    so the variable is a safe one to fix.
    """
    x = snap_binaries(problem, x_bar)
    grad = 2.0 * (problem.hfull @ x) + problem.c
    step = 1.0 - 2.0 * x
    return step * grad + problem.hfull.diagonal() * step * step


class _Run:
    """Clock and bookkeeping shared by the phases of one heuristic run."""

    def __init__(self, method: str, config: HeuristicConfig):
        self.method = method
        self.config = config
        self.start = time.monotonic()
        self.deadline = Deadline(self.start + config.total_limit)
        self.phase_times = {"relax": 0.0, "cover": 0.0, "subsolve": 0.0}
        self.trace = IncumbentTrace(origin_time=self.start)
        self.best: np.ndarray | None = None
        self.best_obj = np.inf

    def now(self) -> float:
        return time.monotonic() - self.start

    def phase_deadline(self, seconds: float) -> Deadline:
        return Deadline.after(seconds).earliest(self.deadline)

    def timed(self, phase: str, fn: Callable, *args, **kw):
        t0 = time.monotonic()
        try:
            return fn(*args, **kw)
        finally:
            self.phase_times[phase] += time.monotonic() - t0

    def absorb(self, problem: Problem, result, offset: float) -> None:
        """Merge a branch-and-bound result, re-verifying on the original problem."""
        for t, v in result.trace.entries:
            self.trace.record(t + offset, v)
        if result.solution is None:
            return
        x = snap_binaries(problem, result.solution.x)
        if not check_feasibility(problem, x).feasible:
            log.warning("%s: subsolve solution fails on the original problem", self.method)
            return
        obj = float(eval_objective(problem, x))
        if obj < self.best_obj:
            self.best, self.best_obj = x, obj

    def finish(self, fixed_set=(), failure: str | None = None, relax_status=None,
               sub_status=None) -> HeuristicResult:
        sol = None
        if self.best is not None:
            t_found = self.trace.entries[-1][0] if self.trace.entries else self.now()
            sol = Solution(self.best, self.best_obj, True, t_found)
            failure = None if failure == SUBPROBLEM_TIMEOUT else failure
        elif failure is None:
            failure = SUBPROBLEM_TIMEOUT
        return HeuristicResult(self.method, sol, self.trace, dict(self.phase_times), tuple(fixed_set),
                               failure, relax_status, sub_status)


def _relax(run: _Run, problem: Problem, budget: float, to_optimality: bool) -> RelaxationSolution:
    dl = run.phase_deadline(budget)
    if run.config.relaxation == "LP":
        return run.timed("relax", solve_lp_relaxation, problem, dl)
    mode = NlpMode.IMPROVE if to_optimality else NlpMode(run.config.nlp_mode)
    return run.timed("relax", solve_nlp_relaxation, problem, dl, mode)


def _subsolve(run: _Run, problem: Problem, sub: Problem, warm: np.ndarray | None):
    offset = run.now()
    config = BnbConfig(warm_start=warm, max_nodes=run.config.node_limit)
    res = run.timed("subsolve", branch_and_bound, sub, config, run.deadline)
    run.absorb(problem, res, offset)
    return res


def _fix_and_search(run: _Run, problem: Problem, x_bar: np.ndarray, candidates, p: float,
                    relax_status) -> HeuristicResult:
    scores = flip_costs(problem, x_bar) if run.config.tie_break == "flip_cost" else None
    fixed = select_fix_set(x_bar, candidates, p, scores)
    sub = fix_variables(problem, {i: round_half_up(x_bar[i]) for i in fixed})
    warm = snap_binaries(problem, x_bar)
    res = _subsolve(run, problem, sub, warm)
    failure = SUBPROBLEM_INFEASIBLE if res.status is SolveStatus.INFEASIBLE else None
    return run.finish(fixed, failure, relax_status, res.status)


def relax_search(problem: Problem, config: HeuristicConfig | None = None) -> HeuristicResult:
    """Time-capped relaxation, partial rounding of all binaries, sub-MBQP search."""
    config = config or HeuristicConfig()
    run = _Run("relax_search", config)
    relax = _relax(run, problem, config.T_r, to_optimality=False)
    if not relax.status.has_point:
        return run.finish(failure=RELAXATION_FAILED, relax_status=relax.status)
    return _fix_and_search(run, problem, relax.x, problem.binaries, config.p, relax.status)


def cover_relax_search(problem: Problem, config: HeuristicConfig | None = None) -> HeuristicResult:
    """As :func:`relax_search`, with the candidate set restricted to a vertex cover."""
    config = config or HeuristicConfig()
    run = _Run("cover_relax_search", config)
    relax = _relax(run, problem, config.T_r, to_optimality=False)
    if not relax.status.has_point:
        return run.finish(failure=RELAXATION_FAILED, relax_status=relax.status)
    cover = run.timed("cover", min_vertex_cover, build_hessian_graph(problem),
                      run.phase_deadline(config.T_c), config.node_limit)
    return _fix_and_search(run, problem, relax.x, cover.members, config.p, relax.status)


def _continue_on_original(run: _Run, problem: Problem) -> None:
    if run.best is not None and not run.deadline.expired():
        _subsolve(run, problem, problem, run.best)


def rens_baseline(problem: Problem, config: HeuristicConfig | None = None) -> HeuristicResult:
    """Fix binaries that are integral in a finished relaxation, solve the rest,
    then keep branching on the full problem with that incumbent."""
    config = config or HeuristicConfig()
    run = _Run("rens", config)
    budget = config.total_limit - config.reserve
    relax = _relax(run, problem, budget, to_optimality=True)
    if not relax.status.has_point or relax.timed_out:
        return run.finish(failure=RELAXATION_FAILED, relax_status=relax.status)
    x_bar = relax.x
    fixed = tuple(int(i) for i in problem.binary_index()
                  if abs(x_bar[i] - round(x_bar[i])) <= INT_TOL)
    sub = fix_variables(problem, {i: int(round(x_bar[i])) for i in fixed})
    res = _subsolve(run, problem, sub, None)
    failure = SUBPROBLEM_INFEASIBLE if res.status is SolveStatus.INFEASIBLE else None
    _continue_on_original(run, problem)
    return run.finish(fixed, failure, relax.status, res.status)


def undercover_baseline(problem: Problem, config: HeuristicConfig | None = None) -> HeuristicResult:
    """Fix a whole vertex cover to rounded relaxation values, solve the
    linear-objective remainder, then keep branching on the full problem."""
    config = config or HeuristicConfig()
    run = _Run("undercover", config)
    cover = run.timed("cover", min_vertex_cover, build_hessian_graph(problem),
                      run.phase_deadline(config.T_c), config.node_limit)
    budget = max(config.total_limit - config.reserve - run.now(), 0.0)
    relax = _relax(run, problem, budget, to_optimality=True)
    if not relax.status.has_point or relax.timed_out:
        return run.finish(failure=RELAXATION_FAILED, relax_status=relax.status)
    x_bar = relax.x
    fixed = tuple(sorted(cover.members))
    sub = fix_variables(problem, {i: round_half_up(x_bar[i]) for i in fixed})
    res = _subsolve(run, problem, sub, None)
    failure = SUBPROBLEM_INFEASIBLE if res.status is SolveStatus.INFEASIBLE else None
    _continue_on_original(run, problem)
    return run.finish(fixed, failure, relax.status, res.status)


def bnb_method(problem: Problem, config: HeuristicConfig | None = None) -> HeuristicResult:
    """Plain branch-and-bound under the same clock, for benchmark comparisons."""
    config = config or HeuristicConfig()
    run = _Run("branch_and_bound", config)
    res = _subsolve(run, problem, problem, None)
    return run.finish((), SUBPROBLEM_INFEASIBLE if res.status is SolveStatus.INFEASIBLE else None,
                      None, res.status)


METHODS: dict[str, Callable[[Problem, HeuristicConfig], HeuristicResult]] = {
    "relax_search": relax_search,
    "cover_relax_search": cover_relax_search,
    "rens": rens_baseline,
    "undercover": undercover_baseline,
    "branch_and_bound": bnb_method,
}
