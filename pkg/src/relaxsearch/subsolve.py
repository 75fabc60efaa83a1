"""Branch-and-bound over McCormick LP bounds, plus a brute-force oracle.

Node selection dives depth-first toward the rounding direction of the
branching variable and falls back to the best open bound whenever a dive
ends.  Every node LP point is rounded and kept when feasible.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    FEAS_TOL, INT_TOL, Deadline, Problem, ProblemError, Solution, SolveStatus,
    check_feasibility, eval_objective, snap_binaries,
)
from .relax import lp_minimize, solve_lp_relaxation

log = logging.getLogger(__name__)

PRUNE_TOL = 1e-9
BRUTE_FORCE_MAX_BINARIES = 24


@dataclass
class IncumbentTrace:
    """Improving incumbents as ``(seconds since origin, objective)`` pairs."""

    entries: list[tuple[float, float]] = field(default_factory=list)
    origin_time: float = 0.0

    def record(self, t: float, objective: float) -> bool:
        if self.entries:
            last_t, last_obj = self.entries[-1]
            if objective >= last_obj:
                return False
            # keep times strictly increasing even at clock granularity
            t = max(t, np.nextafter(last_t, np.inf))
        self.entries.append((float(t), float(objective)))
        return True

    def shifted(self, offset: float) -> "IncumbentTrace":
        return IncumbentTrace([(t + offset, v) for t, v in self.entries], self.origin_time - offset)

    def merged(self, other: "IncumbentTrace") -> "IncumbentTrace":
        """Union of two traces on the same clock, keeping only strict improvements."""
        out = IncumbentTrace(origin_time=self.origin_time)
        for t, v in sorted(self.entries + other.entries):
            out.record(t, v)
        return out

    @property
    def best(self) -> float | None:
        return self.entries[-1][1] if self.entries else None

    def objectives(self) -> list[float]:
        return [v for _, v in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class BnbConfig:
    time_limit: float | None = None
    feas_tol: float = FEAS_TOL
    int_tol: float = INT_TOL
    branching: str = "most_fractional"
    node_selection: str = "dfs_plunge"
    warm_start: np.ndarray | None = None
    max_nodes: int | None = None

    def __post_init__(self) -> None:
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")
        if self.branching != "most_fractional":
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.node_selection != "dfs_plunge":
            raise ValueError(f"unknown node selection {self.node_selection!r}")


@dataclass
class BnbResult:
    solution: Solution | None
    status: SolveStatus
    trace: IncumbentTrace
    nodes: int = 0

    def __iter__(self):
        return iter((self.solution, self.status, self.trace))


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    depth: int = field(compare=False, default=0)


def _most_fractional(x: np.ndarray, candidates: np.ndarray, int_tol: float) -> int | None:
    vals = x[candidates]
    frac = np.abs(vals - np.round(vals))
    mask = frac > int_tol
    if not mask.any():
        return None
    score = np.where(mask, np.abs(vals - 0.5), np.inf)
    return int(candidates[int(np.argmin(score))])  # argmin takes the lowest index on ties


def branch_and_bound(problem: Problem, config: BnbConfig | None = None,
                     deadline: Deadline | None = None) -> BnbResult:
    """Solve ``problem`` to optimality or until the time limit.

    ``deadline`` (if given) is combined with ``config.time_limit``; the
    earlier one wins.
    """
    config = config or BnbConfig()
    start = time.monotonic()
    dl = Deadline.after(config.time_limit)
    if deadline is not None:
        dl = dl.earliest(deadline)
    trace = IncumbentTrace(origin_time=start)
    inc_x: np.ndarray | None = None
    inc_obj = np.inf

    def offer(x: np.ndarray, at_start: bool = False) -> None:
        nonlocal inc_x, inc_obj
        x = snap_binaries(problem, x)
        if not check_feasibility(problem, x, config.feas_tol).feasible:
            return
        obj = float(eval_objective(problem, x))
        if obj < inc_obj:
            inc_x, inc_obj = x, obj
            trace.record(0.0 if at_start else time.monotonic() - start, obj)

    if config.warm_start is not None:
        ws = np.asarray(config.warm_start, dtype=float)
        if ws.shape == (problem.n,):
            offer(ws, at_start=True)

    bins = problem.binary_index()
    counter = itertools.count()
    heap: list[_Node] = []
    dive: _Node | None = _Node(-np.inf, next(counter), problem.lb.copy(), problem.ub.copy())
    nodes = 0
    timed_out = False

    while dive is not None or heap:
        if dl.expired() or (config.max_nodes is not None and nodes >= config.max_nodes):
            timed_out = True
            break
        node = dive if dive is not None else heapq.heappop(heap)
        dive = None
        if node.bound >= inc_obj - PRUNE_TOL:
            continue
        nodes += 1
        sub = problem.replace(lb=node.lb, ub=node.ub)
        relax = solve_lp_relaxation(sub, dl)
        if relax.status is SolveStatus.INFEASIBLE:
            continue
        if relax.status is not SolveStatus.OPTIMAL:
            if dl.expired():
                timed_out = True
                break
            # numerical breakdown: branch blind on the first free binary
            free = bins[node.lb[bins] != node.ub[bins]]
            if len(free) == 0:
                offer(node.lb.copy())
                continue
            j = int(free[0])
            x_bar = None
            bound = node.bound
        else:
            bound = max(relax.objective, node.bound)
            if bound >= inc_obj - PRUNE_TOL:
                continue
            x_bar = relax.x
            free = bins[node.lb[bins] != node.ub[bins]]
            j = _most_fractional(x_bar, free, config.int_tol)
            offer(x_bar)
            if j is None:
                continue  # integral LP optimum closes the node
        down_lb, down_ub = node.lb.copy(), node.ub.copy()
        down_ub[j] = 0.0
        up_lb, up_ub = node.lb.copy(), node.ub.copy()
        up_lb[j] = 1.0
        down = _Node(bound, next(counter), down_lb, down_ub, node.depth + 1)
        up = _Node(bound, next(counter), up_lb, up_ub, node.depth + 1)
        if x_bar is not None and x_bar[j] >= 0.5:
            dive, other = up, down
        else:
            dive, other = down, up
        heapq.heappush(heap, other)

    if inc_x is None:
        status = SolveStatus.NO_SOLUTION_TIMEOUT if timed_out else SolveStatus.INFEASIBLE
        return BnbResult(None, status, trace, nodes)
    status = SolveStatus.FEASIBLE_SUBOPTIMAL if timed_out else SolveStatus.OPTIMAL
    sol = Solution(inc_x, inc_obj, True, trace.entries[-1][0])
    return BnbResult(sol, status, trace, nodes)


def brute_force(problem: Problem, chunk: int = 1 << 15) -> Solution:
    """Enumerate every binary completion within bounds and return the best.

    Continuous variables, if any, are optimized by an LP per completion.
    """
    bins = problem.binary_index()
    free = bins[problem.lb[bins] != problem.ub[bins]]
    if len(free) > BRUTE_FORCE_MAX_BINARIES:
        raise ProblemError(f"brute_force limited to {BRUTE_FORCE_MAX_BINARIES} free binaries, got {len(free)}")
    cont = np.array(sorted(set(range(problem.n)) - set(bins.tolist())), dtype=np.int64)
    if len(cont) and len(problem.h_rows):
        in_h = set(problem.h_rows.tolist()) | set(problem.h_cols.tolist())
        if in_h & set(cont.tolist()):
            raise ProblemError("brute_force needs continuous variables to enter linearly")
    start = time.monotonic()
    base = snap_binaries(problem, problem.lb)
    total = 1 << len(free)
    best_x, best_obj = None, np.inf

    if len(cont) == 0:
        shifts = np.arange(len(free))
        for lo in range(0, total, chunk):
            codes = np.arange(lo, min(lo + chunk, total))
            X = np.tile(base, (len(codes), 1))
            X[:, free] = (codes[:, None] >> shifts) & 1
            ok = np.ones(len(codes), dtype=bool)
            if problem.m:
                R = X @ problem.A.T.toarray() - problem.b
                eq = np.array([s == "=" for s in problem.senses])
                viol = np.where(eq, np.abs(R), np.maximum(R, 0.0))
                ok = viol.max(axis=1) <= FEAS_TOL
            if not ok.any():
                continue
            objs = np.where(ok, eval_objective(problem, X), np.inf)
            k = int(np.argmin(objs))
            if objs[k] < best_obj:
                best_obj, best_x = float(objs[k]), X[k].copy()
    else:
        A = problem.A.toarray()
        for code in range(total):
            x = base.copy()
            x[free] = (code >> np.arange(len(free))) & 1
            fixed_part = A[:, bins] @ x[bins]
            res = lp_minimize(problem.c[cont], A[:, cont], problem.b - fixed_part, problem.senses,
                              (problem.lb[cont], problem.ub[cont]))
            if res.status is not SolveStatus.OPTIMAL:
                continue
            x[cont] = res.x
            if not check_feasibility(problem, x).feasible:
                continue
            obj = float(eval_objective(problem, x))
            if obj < best_obj:
                best_obj, best_x = obj, x
    elapsed = time.monotonic() - start
    if best_x is None:
        return Solution(np.full(problem.n, np.nan), np.inf, False, elapsed)
    # recompute on the exact point so the value matches eval_objective bit for bit
    return Solution(best_x, float(eval_objective(problem, best_x)), True, elapsed)
