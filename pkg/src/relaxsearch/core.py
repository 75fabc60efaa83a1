"""MBQP data model: objective and feasibility evaluation, fixing, relaxation.

A problem is ``min x^T H x + c^T x`` subject to ``A x (<= | =) b``, variable
bounds, and a set of binary variables.  ``H`` is stored as upper-triangle
triplets and is always read as the symmetric matrix they describe, so an
off-diagonal triplet ``(i, j, v)`` contributes ``2 v x_i x_j``.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

FEAS_TOL = 1e-6
INT_TOL = 1e-6

LE = "<="
EQ = "="
GE = ">="


class ProblemError(ValueError):
    """Malformed problem data or an operation applied with wrong dimensions."""


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE_SUBOPTIMAL = "FeasibleSuboptimal"
    INFEASIBLE = "Infeasible"
    NO_SOLUTION_TIMEOUT = "NoSolutionTimeout"

    @property
    def has_point(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE_SUBOPTIMAL)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Problem:
    """Immutable MBQP instance.

    Use :func:`make_problem` to build one from loose data; the constructor
    expects already-normalized arrays (``senses`` only ``"<="`` / ``"="``).
    """

    n: int
    c: np.ndarray
    h_rows: np.ndarray
    h_cols: np.ndarray
    h_vals: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    senses: tuple[str, ...]
    binaries: frozenset[int]
    lb: np.ndarray
    ub: np.ndarray
    name: str = ""
    _hfull: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = self.n
        if self.c.shape != (n,):
            raise ProblemError(f"c has shape {self.c.shape}, expected ({n},)")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ProblemError("bounds must have length n")
        m = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ProblemError(f"A has {self.A.shape[1]} columns, expected {n}")
        if self.b.shape != (m,) or len(self.senses) != m:
            raise ProblemError("b and senses must have one entry per row of A")
        bad = set(self.senses) - {LE, EQ}
        if bad:
            raise ProblemError(f"unsupported row senses {sorted(bad)}")
        if not (len(self.h_rows) == len(self.h_cols) == len(self.h_vals)):
            raise ProblemError("H triplet arrays differ in length")
        if len(self.h_rows):
            if np.any(self.h_rows > self.h_cols):
                raise ProblemError("H triplets must satisfy i <= j")
            if self.h_rows.min() < 0 or self.h_cols.max() >= n:
                raise ProblemError("H index out of range")
            keys = self.h_rows.astype(np.int64) * n + self.h_cols
            if len(np.unique(keys)) != len(keys):
                raise ProblemError("duplicate H triplets")
        for j in self.binaries:
            if not 0 <= j < n:
                raise ProblemError(f"binary index {j} out of range")
        if np.any(self.lb > self.ub):
            raise ProblemError("lower bound exceeds upper bound")
        bin_idx = self.binary_index()
        if len(bin_idx) and (
            np.any(self.lb[bin_idx] < 0) or np.any(self.ub[bin_idx] > 1)
            or np.any((self.lb[bin_idx] != 0) & (self.lb[bin_idx] != 1))
            or np.any((self.ub[bin_idx] != 0) & (self.ub[bin_idx] != 1))
        ):
            raise ProblemError("binary variables need bounds within {0, 1}")
        for arr in (self.c, self.h_rows, self.h_cols, self.h_vals, self.b, self.lb, self.ub):
            _frozen(arr)
        hs = sp.coo_matrix((self.h_vals, (self.h_rows, self.h_cols)), shape=(n, n)).tocsr()
        full = hs + hs.T - sp.diags(hs.diagonal())
        object.__setattr__(self, "_hfull", full.tocsr())

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def hfull(self) -> sp.csr_matrix:
        """The full symmetric ``H`` described by the triplets."""
        return self._hfull

    def binary_index(self) -> np.ndarray:
        return np.array(sorted(self.binaries), dtype=np.int64)

    def h_triplets(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(v)) for i, j, v in zip(self.h_rows, self.h_cols, self.h_vals)]

    def replace(self, **changes) -> "Problem":
        fields = dict(
            n=self.n, c=self.c.copy(), h_rows=self.h_rows.copy(), h_cols=self.h_cols.copy(),
            h_vals=self.h_vals.copy(), A=self.A, b=self.b.copy(), senses=self.senses,
            binaries=self.binaries, lb=self.lb.copy(), ub=self.ub.copy(), name=self.name,
        )
        fields.update(changes)
        return Problem(**fields)


def make_problem(
    n: int,
    c: Sequence[float] | np.ndarray | None = None,
    H: Iterable[tuple[int, int, float]] = (),
    A=None,
    b: Sequence[float] | None = None,
    senses: Sequence[str] | None = None,
    binaries: Iterable[int] | None = None,
    lb: Sequence[float] | None = None,
    ub: Sequence[float] | None = None,
    name: str = "",
) -> Problem:
    """Build a :class:`Problem`, normalizing loose inputs.

    ``H`` triplets with ``i > j`` are swapped into the upper triangle, zero
    values are dropped, ``">="`` rows are negated into ``"<="`` rows.
    ``binaries`` defaults to all variables; binaries get bounds ``[0, 1]``
    unless explicit bounds are given.
    """
    c_arr = np.zeros(n) if c is None else np.asarray(c, dtype=float).copy()
    rows, cols, vals = [], [], []
    for i, j, v in H:
        i, j = int(i), int(j)
        if i > j:
            i, j = j, i
        if v != 0:
            rows.append(i)
            cols.append(j)
            vals.append(float(v))
    if A is None:
        A_mat = sp.csr_matrix((0, n))
    elif sp.issparse(A):
        A_mat = sp.csr_matrix(A, dtype=float)
    else:
        A_mat = sp.csr_matrix(np.asarray(A, dtype=float).reshape(-1, n))
    m = A_mat.shape[0]
    b_arr = np.zeros(m) if b is None else np.asarray(b, dtype=float).copy()
    sense_list = [LE] * m if senses is None else list(senses)
    if len(sense_list) != m or b_arr.shape != (m,):
        raise ProblemError("b and senses must have one entry per row of A")
    flip = np.array([s == GE for s in sense_list], dtype=bool)
    if flip.any():
        scale = sp.diags(np.where(flip, -1.0, 1.0))
        A_mat = sp.csr_matrix(scale @ A_mat)
        b_arr = np.where(flip, -b_arr, b_arr)
        sense_list = [LE if s == GE else s for s in sense_list]
    bin_set = frozenset(range(n)) if binaries is None else frozenset(int(j) for j in binaries)
    lb_arr = np.zeros(n) if lb is None else np.asarray(lb, dtype=float).copy()
    ub_arr = np.ones(n) if ub is None else np.asarray(ub, dtype=float).copy()
    if lb is None or ub is None:
        for j in bin_set:
            if lb is None:
                lb_arr[j] = 0.0
            if ub is None:
                ub_arr[j] = 1.0
    return Problem(
        n=n, c=c_arr,
        h_rows=np.array(rows, dtype=np.int64), h_cols=np.array(cols, dtype=np.int64),
        h_vals=np.array(vals, dtype=float),
        A=A_mat, b=b_arr, senses=tuple(sense_list), binaries=bin_set,
        lb=lb_arr, ub=ub_arr, name=name,
    )


def _check_dim(problem: Problem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != problem.n:
        raise ProblemError(f"point has length {x.shape[-1]}, expected {problem.n}")
    return x


def eval_objective(problem: Problem, x) -> float | np.ndarray:
    """Return ``x^T H x + c^T x``; a 2-D ``x`` is evaluated row by row."""
    x = _check_dim(problem, x)
    weight = np.where(problem.h_rows == problem.h_cols, 1.0, 2.0) * problem.h_vals
    if x.ndim == 1:
        quad = float(np.sum(weight * x[problem.h_rows] * x[problem.h_cols]))
        return quad + float(problem.c @ x)
    quad = (x[:, problem.h_rows] * x[:, problem.h_cols]) @ weight
    return quad + x @ problem.c


@dataclass(frozen=True)
class FeasibilityReport:
    row_violation: float
    integrality_violation: float
    bound_violation: float
    tol: float = FEAS_TOL

    @property
    def feasible(self) -> bool:
        return max(self.row_violation, self.integrality_violation, self.bound_violation) <= self.tol

    def __bool__(self) -> bool:
        return self.feasible


def row_violations(problem: Problem, x: np.ndarray) -> np.ndarray:
    """Per-row violation: ``max(0, a x - b)`` for ``<=`` rows, ``|a x - b|`` for ``=``."""
    if problem.m == 0:
        return np.zeros(0)
    r = problem.A @ x - problem.b
    eq = np.array([s == EQ for s in problem.senses], dtype=bool)
    return np.where(eq, np.abs(r), np.maximum(r, 0.0))


def check_feasibility(problem: Problem, x, tol: float = FEAS_TOL) -> FeasibilityReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = _check_dim(problem, x)
    if x.ndim != 1:
        raise ProblemError("check_feasibility expects a single point")
    rows = row_violations(problem, x)
    bounds = np.maximum(np.maximum(problem.lb - x, x - problem.ub), 0.0)
    bin_idx = problem.binary_index()
    integ = np.abs(x[bin_idx] - np.round(x[bin_idx])) if len(bin_idx) else np.zeros(0)
    return FeasibilityReport(
        row_violation=float(rows.max(initial=0.0)),
        integrality_violation=float(integ.max(initial=0.0)),
        bound_violation=float(bounds.max(initial=0.0)),
        tol=tol,
    )


def fix_variables(problem: Problem, assignments: Mapping[int, int]) -> Problem:
    """Fix binaries by collapsing both bounds onto the assigned value."""
    if not assignments:
        return problem
    lb, ub = problem.lb.copy(), problem.ub.copy()
    for j, v in assignments.items():
        if j not in problem.binaries:
            raise ProblemError(f"variable {j} is not binary")
        if v not in (0, 1):
            raise ProblemError(f"assignment x_{j} = {v} is not in {{0, 1}}")
        lb[j] = ub[j] = float(v)
    return problem.replace(lb=lb, ub=ub)


def relax_integrality(problem: Problem) -> Problem:
    if not problem.binaries:
        return problem
    return problem.replace(binaries=frozenset())


def snap_binaries(problem: Problem, x) -> np.ndarray:
    """Round binary coordinates to exact 0/1 (half up) and clip into bounds."""
    x = np.clip(np.asarray(x, dtype=float).copy(), problem.lb, problem.ub)
    bin_idx = problem.binary_index()
    if len(bin_idx):
        x[bin_idx] = np.floor(x[bin_idx] + 0.5)
    return x


@dataclass(frozen=True)
class Solution:
    x: np.ndarray
    objective: float
    feasible: bool
    wall_time: float = 0.0


class Deadline:
    """Monotonic-clock deadline; ``None`` seconds means no limit."""

    __slots__ = ("expires_at",)

    def __init__(self, expires_at: float | None):
        self.expires_at = expires_at

    @classmethod
    def after(cls, seconds: float | None) -> "Deadline":
        if seconds is None:
            return cls(None)
        return cls(time.monotonic() + max(float(seconds), 0.0))

    @classmethod
    def never(cls) -> "Deadline":
        return cls(None)

    def expired(self) -> bool:
        return self.expires_at is not None and time.monotonic() >= self.expires_at

    def remaining(self) -> float:
        if self.expires_at is None:
            return float("inf")
        return max(self.expires_at - time.monotonic(), 0.0)

    def earliest(self, other: "Deadline") -> "Deadline":
        if self.expires_at is None:
            return other
        if other.expires_at is None:
            return self
        return Deadline(min(self.expires_at, other.expires_at))

    def __repr__(self) -> str:
        return f"Deadline(remaining={self.remaining():.3f}s)"


def as_deadline(deadline: "Deadline | float | None") -> Deadline:
    """Accept a :class:`Deadline`, a budget in seconds, or ``None``."""
    if isinstance(deadline, Deadline):
        return deadline
    return Deadline.after(deadline)
