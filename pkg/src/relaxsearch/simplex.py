"""Revised bounded-variable primal simplex (two phases) with a sparse basis factor.

Structural variables carry finite bounds and sit at one of them while
nonbasic.  Rows are ``<=`` (slack in ``[0, inf)``) or ``=``.  Phase 1
minimizes the sum of artificials added for rows whose slack cannot start
basic and feasible; phase 2 minimizes the real cost with artificials locked
at zero.  The deadline is polled once per pivot.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import Deadline

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
PRIMAL_TOL = 1e-9
PHASE1_TOL = 1e-7
BLAND_AFTER = 50
REFACTOR_EVERY = 64

AT_LOWER, AT_UPPER, BASIC = 0, 1, 2


@dataclass
class SimplexOutcome:
    """Raw kernel result.  ``stage`` is one of ``optimal``, ``infeasible``,
    ``phase1_timeout``, ``phase2_timeout``, ``breakdown``."""

    stage: str
    x: np.ndarray | None
    objective: float
    iterations: int
    message: str = ""


class _Basis:
    """Basis factor ``B = M[:, basis]``: a sparse LU plus product-form etas."""

    def __init__(self, M: sp.csc_matrix, rhs, lower, upper, basis, state, xval):
        self.M = M.tocsc()  # column matrix, m x N
        self.MT = self.M.T.tocsr()
        self.rhs = rhs
        self.lower = lower
        self.upper = upper
        self.basis = basis
        self.state = state
        self.xval = xval  # value of every column; basic entries refreshed from xB
        self.refactor()

    def refactor(self) -> None:
        B = self.M[:, self.basis].tocsc()
        diag = B.diagonal()
        if B.nnz == len(diag) and np.all(diag != 0):
            # slack/artificial starting basis: a signed identity
            self.lu = None
            self.diag = diag
        else:
            try:
                self.lu = spla.splu(B, permc_spec="COLAMD")
            except RuntimeError as exc:  # exactly singular
                raise np.linalg.LinAlgError(str(exc)) from exc
        self.etas: list[tuple[int, np.ndarray]] = []
        nonbasic = self.state != BASIC
        r = self.rhs - self.M[:, nonbasic] @ self.xval[nonbasic]
        self.xB = self.ftran(r)
        if not np.all(np.isfinite(self.xB)):
            raise np.linalg.LinAlgError("basis factor produced non-finite values")

    def _solve(self, v: np.ndarray, trans: bool = False) -> np.ndarray:
        if self.lu is None:
            return v / self.diag
        return self.lu.solve(v, trans="T" if trans else "N")

    def ftran(self, a: np.ndarray) -> np.ndarray:
        """``B^{-1} a``."""
        w = self._solve(np.asarray(a, dtype=float))
        for r, alpha in self.etas:
            wr = w[r] / alpha[r]
            w -= alpha * wr
            w[r] = wr
        return w

    def btran(self, cb: np.ndarray) -> np.ndarray:
        """``y`` with ``y^T B = cb^T``."""
        u = np.array(cb, dtype=float)
        for r, alpha in reversed(self.etas):
            # only entry r of u^T E changes
            u[r] = (u[r] - (u @ alpha - u[r] * alpha[r])) / alpha[r]
        return self._solve(u, trans=True)

    def column(self, q: int) -> np.ndarray:
        lo, hi = self.M.indptr[q], self.M.indptr[q + 1]
        a = np.zeros(self.M.shape[0])
        a[self.M.indices[lo:hi]] = self.M.data[lo:hi]
        return self.ftran(a)

    def pivot(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = self.btran(cost[self.basis])
        return cost - self.MT @ y


def _run_phase(tab: _Basis, cost: np.ndarray, locked: np.ndarray, deadline: Deadline,
               counter: list[int]) -> str:
    """Iterate until optimal for ``cost``; returns ``optimal``, ``timeout`` or ``breakdown``."""
    degenerate_run = 0
    while True:
        if deadline.expired():
            return "timeout"
        d = tab.reduced_costs(cost)
        st = tab.state
        cand_lo = (st == AT_LOWER) & (d < -COST_TOL) & ~locked
        cand_hi = (st == AT_UPPER) & (d > COST_TOL) & ~locked
        cand = cand_lo | cand_hi
        if not cand.any():
            return "optimal"
        bland = degenerate_run >= BLAND_AFTER
        if bland:
            q = int(np.flatnonzero(cand)[0])
        else:
            q = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
        direction = 1.0 if st[q] == AT_LOWER else -1.0
        alpha = tab.column(q)
        col = alpha * direction

        lB = tab.lower[tab.basis]
        uB = tab.upper[tab.basis]
        ratios = np.full(len(col), np.inf)
        pos = col > PIVOT_TOL
        neg = col < -PIVOT_TOL
        ratios[pos] = (tab.xB[pos] - lB[pos]) / col[pos]
        with np.errstate(invalid="ignore"):
            ratios[neg] = (uB[neg] - tab.xB[neg]) / (-col[neg])
        ratios = np.maximum(ratios, 0.0)
        t_row = ratios.min(initial=np.inf)
        t_flip = tab.upper[q] - tab.lower[q]
        if not np.isfinite(t_row) and not np.isfinite(t_flip):
            return "breakdown"

        counter[0] += 1
        if t_flip <= t_row:
            t = t_flip
            tab.xB -= t * col
            tab.state[q] = AT_UPPER if st[q] == AT_LOWER else AT_LOWER
            tab.xval[q] = tab.upper[q] if tab.state[q] == AT_UPPER else tab.lower[q]
            degenerate_run = degenerate_run + 1 if t <= PRIMAL_TOL else 0
            continue

        ties = np.flatnonzero(ratios <= t_row + PRIMAL_TOL)
        if bland:
            r = int(ties[np.argmin(tab.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(col[ties]))])
        if abs(alpha[r]) < PIVOT_TOL:
            return "breakdown"
        t = ratios[r]
        degenerate_run = degenerate_run + 1 if t <= PRIMAL_TOL else 0

        tab.xB -= t * col
        leaving = tab.basis[r]
        entering_value = tab.xval[q] + direction * t
        if col[r] > 0:
            tab.state[leaving] = AT_LOWER
            tab.xval[leaving] = tab.lower[leaving]
        else:
            tab.state[leaving] = AT_UPPER
            tab.xval[leaving] = tab.upper[leaving]
        tab.basis[r] = q
        tab.state[q] = BASIC
        tab.xB[r] = entering_value
        tab.pivot(r, alpha)

        if len(tab.etas) >= REFACTOR_EVERY and not deadline.expired():
            tab.xval[tab.basis] = tab.xB
            try:
                tab.refactor()
            except np.linalg.LinAlgError:
                return "breakdown"


def simplex_minimize(c, A, b, eq_mask, lb, ub, deadline: Deadline) -> SimplexOutcome:
    """Minimize ``c x`` over ``A x (<=|=) b``, ``lb <= x <= ub``.  ``A`` may be
    dense or scipy-sparse."""
    c = np.asarray(c, dtype=float)
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    eq_mask = np.asarray(eq_mask, dtype=bool)
    m, n = A.shape
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("simplex_minimize requires finite variable bounds")
    if np.any(lb > ub + PRIMAL_TOL):
        return SimplexOutcome("infeasible", None, np.inf, 0, "crossed bounds")
    if deadline.expired():
        return SimplexOutcome("phase1_timeout", None, np.inf, 0)

    # fixed columns leave the problem
    free = ub - lb > PRIMAL_TOL
    x_full = lb.copy()
    b_red = b - A[:, ~free] @ x_full[~free] if m else b.copy()
    A_red = A[:, free]

    # drop empty rows after checking them
    A_red.eliminate_zeros()
    nonempty = np.diff(A_red.tocsr().indptr) > 0 if m else np.zeros(0, dtype=bool)
    empty = ~nonempty
    if np.any(empty & eq_mask & (np.abs(b_red) > PHASE1_TOL)) or np.any(empty & ~eq_mask & (b_red < -PHASE1_TOL)):
        return SimplexOutcome("infeasible", None, np.inf, 0, "empty row violated")
    A_red, b_red, eq_red = A_red[nonempty], b_red[nonempty], eq_mask[nonempty]
    m_red, n_red = A_red.shape
    c_red = c[free]
    lo, hi = lb[free], ub[free]

    if m_red == 0:
        x = np.where(c_red < 0, hi, lo)
        x_full[free] = x
        return SimplexOutcome("optimal", x_full, float(c @ x_full), 0)

    resid = b_red - A_red @ lo
    le_rows = np.flatnonzero(~eq_red)
    n_slack = len(le_rows)
    slack_ok = np.zeros(m_red, dtype=bool)
    slack_ok[le_rows] = resid[le_rows] >= 0
    art_rows = np.flatnonzero(~slack_ok)
    n_art = len(art_rows)

    N = n_red + n_slack + n_art
    slack_col = {int(r): n_red + k for k, r in enumerate(le_rows)}
    art_sign = np.where(resid[art_rows] >= 0, 1.0, -1.0)
    M = sp.hstack([
        sp.csc_matrix(A_red),
        sp.csc_matrix((np.ones(n_slack), (le_rows, np.arange(n_slack))), shape=(m_red, n_slack)),
        sp.csc_matrix((art_sign, (art_rows, np.arange(n_art))), shape=(m_red, n_art)),
    ], format="csc")

    lower = np.concatenate([lo, np.zeros(n_slack), np.zeros(n_art)])
    upper = np.concatenate([hi, np.full(n_slack, np.inf), np.full(n_art, np.inf)])
    state = np.full(N, AT_LOWER, dtype=np.int8)
    xval = lower.copy()
    basis = np.empty(m_red, dtype=np.int64)
    for r in range(m_red):
        basis[r] = slack_col[r] if slack_ok[r] else n_red + n_slack + int(np.searchsorted(art_rows, r))
    state[basis] = BASIC

    tab = _Basis(M, b_red, lower, upper, basis, state, xval)
    locked = np.zeros(N, dtype=bool)
    counter = [0]

    def extract() -> np.ndarray:
        tab.xval[tab.basis] = tab.xB
        x = np.clip(tab.xval[:n_red], lo, hi)
        out = x_full.copy()
        out[free] = x
        return out

    if n_art:
        cost1 = np.zeros(N)
        cost1[n_red + n_slack:] = 1.0
        stage = _run_phase(tab, cost1, locked, deadline, counter)
        if stage == "timeout":
            return SimplexOutcome("phase1_timeout", None, np.inf, counter[0])
        if stage == "breakdown":
            return SimplexOutcome("breakdown", None, np.inf, counter[0], "phase 1 pivot breakdown")
        tab.xval[tab.basis] = tab.xB
        infeas = float(np.sum(tab.xval[n_red + n_slack:]))
        if infeas > PHASE1_TOL * max(1.0, np.abs(b_red).max(initial=0.0)):
            return SimplexOutcome("infeasible", None, np.inf, counter[0], f"phase 1 optimum {infeas:.3g}")
        locked[n_red + n_slack:] = True
        tab.upper[n_red + n_slack:] = 0.0

    cost2 = np.zeros(N)
    cost2[:n_red] = c_red
    stage = _run_phase(tab, cost2, locked, deadline, counter)
    if stage == "breakdown":
        return SimplexOutcome("breakdown", None, np.inf, counter[0], "phase 2 pivot breakdown")
    if stage == "optimal":
        # one clean solve to shed accumulated pivot error
        try:
            tab.xval[tab.basis] = tab.xB
            tab.refactor()
        except np.linalg.LinAlgError:
            pass
    x = extract()
    obj = float(c @ x)
    return SimplexOutcome("optimal" if stage == "optimal" else "phase2_timeout", x, obj, counter[0])
