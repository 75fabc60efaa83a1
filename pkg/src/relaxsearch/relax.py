"""Continuous relaxations: the McCormick LP and the quadratic (NLP) relaxation.

Both solvers honor a deadline and may hand back a feasible but suboptimal
point, which is exactly what the time-capped heuristics consume.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import (
    EQ, FEAS_TOL, Deadline, Problem, SolveStatus, as_deadline, eval_objective, row_violations,
)
from .reformulate import mccormick_linearize, recover_binary_point
from .simplex import simplex_minimize

log = logging.getLogger(__name__)

FW_GAP_TOL = 1e-6
FW_MAX_ITER = 500


@dataclass(frozen=True)
class RelaxationSolution:
    x: np.ndarray | None
    objective: float
    status: SolveStatus
    solve_time: float
    iterations: int = 0
    message: str = ""
    timed_out: bool = False


class NlpMode(str, enum.Enum):
    """``FirstFeasible`` returns the phase-1 point; ``FirstLocal`` and
    ``Improve`` both run Frank-Wolfe to a stationary point, the former
    reporting it as suboptimal since nothing certifies it."""

    FIRST_FEASIBLE = "FirstFeasible"
    FIRST_LOCAL = "FirstLocal"
    IMPROVE = "Improve"


_STAGE_STATUS = {
    "optimal": SolveStatus.OPTIMAL,
    "infeasible": SolveStatus.INFEASIBLE,
    "phase1_timeout": SolveStatus.NO_SOLUTION_TIMEOUT,
    "phase2_timeout": SolveStatus.FEASIBLE_SUBOPTIMAL,
    "breakdown": SolveStatus.NO_SOLUTION_TIMEOUT,
}


def lp_minimize(c, A, b, senses, bounds, deadline=None) -> RelaxationSolution:
    """Minimize ``c x`` subject to ``A x (<=|=) b`` and ``bounds = (lb, ub)``.

    ``A`` may be dense or scipy-sparse.  A deadline that fires during phase 1
    yields ``NoSolutionTimeout``; during phase 2, the current basic feasible
    point with ``FeasibleSuboptimal``.
    """
    start = time.monotonic()
    deadline = as_deadline(deadline)
    lb, ub = bounds
    eq_mask = np.array([s == EQ for s in senses], dtype=bool)
    if not sp.issparse(A):
        A = np.asarray(A, dtype=float).reshape(len(eq_mask), len(c))
    out = simplex_minimize(c, A, b, eq_mask, lb, ub, deadline)
    if out.stage == "breakdown":
        log.warning("simplex breakdown: %s", out.message)
    return RelaxationSolution(
        x=out.x,
        objective=out.objective if out.x is not None else np.inf,
        status=_STAGE_STATUS[out.stage],
        solve_time=time.monotonic() - start,
        iterations=out.iterations,
        message=out.message,
        timed_out=out.stage.endswith("timeout"),
    )


def solve_lp_relaxation(problem: Problem, deadline=None) -> RelaxationSolution:
    """LP relaxation of the McCormick reformulation, projected to original space.

    Products touching a fixed variable are substituted rather than linearized;
    on the problem's box this is the same LP, only smaller.
    """
    lin = mccormick_linearize(problem, substitute_fixed=True)
    base = lin.base
    res = lp_minimize(base.c, base.A, base.b, base.senses, (base.lb, base.ub), deadline)
    if res.x is None:
        return res
    return RelaxationSolution(
        x=recover_binary_point(lin, res.x),
        objective=res.objective + lin.offset,
        status=res.status,
        solve_time=res.solve_time,
        iterations=res.iterations,
        message=res.message,
        timed_out=res.timed_out,
    )


def _segment_step(problem: Problem, x: np.ndarray, direction: np.ndarray,
                  grad: np.ndarray, t_max: float = 1.0) -> float:
    """Step in ``[0, t_max]`` minimizing ``f(x + t d)``, a 1-D quadratic in ``t``."""
    curv = float(direction @ (problem.hfull @ direction))
    slope = float(grad @ direction)
    candidates = [0.0, t_max]
    if curv > 0:
        candidates.append(min(max(-slope / (2.0 * curv), 0.0), t_max))
    values = [slope * t + curv * t * t for t in candidates]
    return candidates[int(np.argmin(values))]


class _ActiveSet:
    """Convex combination of polytope vertices that represents the iterate."""

    def __init__(self, v: np.ndarray):
        self.vertices = {self.key(v): v}
        self.weights = {self.key(v): 1.0}

    @staticmethod
    def key(v: np.ndarray) -> bytes:
        return np.round(v, 9).tobytes()

    def away_vertex(self, grad: np.ndarray) -> tuple[bytes, np.ndarray]:
        k = max(self.vertices, key=lambda k: float(grad @ self.vertices[k]))
        return k, self.vertices[k]

    def toward(self, s: np.ndarray, t: float) -> None:
        k = self.key(s)
        if t >= 1.0:
            self.vertices, self.weights = {k: s}, {k: 1.0}
            return
        for j in self.weights:
            self.weights[j] *= 1.0 - t
        self.vertices.setdefault(k, s)
        self.weights[k] = self.weights.get(k, 0.0) + t

    def away(self, k: bytes, t: float, drop: bool) -> None:
        for j in self.weights:
            self.weights[j] *= 1.0 + t
        self.weights[k] -= t
        if drop:
            del self.weights[k], self.vertices[k]


def solve_nlp_relaxation(problem: Problem, deadline=None,
                         mode: NlpMode | str = NlpMode.FIRST_FEASIBLE,
                         max_iter: int = FW_MAX_ITER,
                         gap_tol: float = FW_GAP_TOL) -> RelaxationSolution:
    """Quadratic relaxation over ``{A x <= b, lb <= x <= ub}``.

    A phase-1 simplex supplies the first feasible point.  The other modes then
    run Frank-Wolfe with away steps: each iteration solves one LP over the
    polytope for the gradient objective and compares that vertex with the
    worst vertex of the current combination, stepping toward the first or
    away from the second by exact line search.  For indefinite ``H`` the best
    step may be a segment endpoint, so the objective never increases.  Stops
    when the Frank-Wolfe gap falls to ``gap_tol``.
    """
    start = time.monotonic()
    deadline = as_deadline(deadline)
    mode = NlpMode(mode)
    n = problem.n
    lb, ub = problem.lb, problem.ub
    feas = lp_minimize(np.zeros(n), problem.A, problem.b, problem.senses, (lb, ub), deadline)
    if not feas.status.has_point:
        return RelaxationSolution(None, np.inf, feas.status, time.monotonic() - start,
                                  feas.iterations, timed_out=feas.timed_out)
    x = feas.x
    f = float(eval_objective(problem, x))
    if mode is NlpMode.FIRST_FEASIBLE:
        return RelaxationSolution(x, f, SolveStatus.FEASIBLE_SUBOPTIMAL, time.monotonic() - start, 0)

    status = SolveStatus.FEASIBLE_SUBOPTIMAL
    stalled = SolveStatus.OPTIMAL if mode is NlpMode.IMPROVE else SolveStatus.FEASIBLE_SUBOPTIMAL
    active = _ActiveSet(x.copy())
    timed_out = False
    it = 0
    while it < max_iter:
        if deadline.expired():
            timed_out = True
            break
        grad = 2.0 * (problem.hfull @ x) + problem.c
        vertex = lp_minimize(grad, problem.A, problem.b, problem.senses, (lb, ub), deadline)
        if vertex.status is not SolveStatus.OPTIMAL:
            timed_out = vertex.timed_out
            break
        it += 1
        d_fw = vertex.x - x
        fw_gap = -float(grad @ d_fw)
        if fw_gap <= gap_tol:
            status = stalled
            break
        k_away, v_away = active.away_vertex(grad)
        d_away = x - v_away
        w_away = active.weights[k_away]
        if fw_gap >= -float(grad @ d_away) or w_away >= 1.0:
            t = _segment_step(problem, x, d_fw, grad)
            direction = d_fw
            if t > 0.0:
                active.toward(vertex.x, t)
        else:
            t_max = w_away / (1.0 - w_away)
            t = _segment_step(problem, x, d_away, grad, t_max)
            direction = d_away
            if t > 0.0:
                active.away(k_away, t, drop=t >= t_max)
        if t == 0.0:
            status = stalled
            break
        x_new = np.clip(x + t * direction, lb, ub)
        f_new = float(eval_objective(problem, x_new))
        if f_new > f:
            break
        x, f = x_new, f_new
    if np.any(row_violations(problem, x) > FEAS_TOL):
        log.warning("Frank-Wolfe iterate drifted outside the polytope")
    return RelaxationSolution(x, f, status, time.monotonic() - start, it, timed_out=timed_out)
