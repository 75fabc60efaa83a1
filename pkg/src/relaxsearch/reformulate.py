"""McCormick (RLT-0) linearization of binary products.

Each off-diagonal product ``x_i x_j`` of binaries becomes an auxiliary
continuous variable ``z_ij`` in ``[0, 1]`` tied to ``x_i, x_j`` by

    z_ij >= x_i + x_j - 1,   z_ij <= x_i,   z_ij <= x_j

and a diagonal term ``H_ii x_i^2`` becomes ``H_ii x_i`` since ``x_i^2 = x_i``
for binaries.  At binary points the linear objective equals the quadratic one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import LE, Problem, ProblemError


class UnsupportedStructureError(ProblemError):
    """A quadratic term involves a non-binary variable."""


@dataclass(frozen=True)
class LinearizedProblem:
    base: Problem
    z_index: dict[tuple[int, int], int]
    original_n: int
    # constant term from products of fixed variables (only with substitute_fixed)
    offset: float = 0.0


def mccormick_linearize(problem: Problem, substitute_fixed: bool = False) -> LinearizedProblem:
    """Return the linear reformulation of ``problem``.

    With ``substitute_fixed`` a product with a variable whose bounds coincide
    is folded into the linear part (or the constant ``offset``) instead of
    getting an auxiliary variable.  This is exact on the problem's box and
    keeps node LPs small inside branch-and-bound.
    """
    n = problem.n
    bins = problem.binaries
    for i, j in zip(problem.h_rows, problem.h_cols):
        if int(i) not in bins or int(j) not in bins:
            raise UnsupportedStructureError(
                f"quadratic term ({int(i)}, {int(j)}) involves a continuous variable"
            )

    fixed = problem.lb == problem.ub if substitute_fixed else np.zeros(n, dtype=bool)
    c = problem.c.copy()
    offset = 0.0
    pairs: list[tuple[int, int]] = []
    coefs: list[float] = []
    for i, j, v in zip(problem.h_rows.tolist(), problem.h_cols.tolist(), problem.h_vals.tolist()):
        if i == j:
            c[i] += v
        elif fixed[i] and fixed[j]:
            offset += 2.0 * v * problem.lb[i] * problem.lb[j]
        elif fixed[i]:
            c[j] += 2.0 * v * problem.lb[i]
        elif fixed[j]:
            c[i] += 2.0 * v * problem.lb[j]
        else:
            pairs.append((i, j))
            coefs.append(2.0 * v)

    npairs = len(pairs)
    total = n + npairs
    z_index = {pair: n + k for k, pair in enumerate(pairs)}
    c_ext = np.concatenate([c, np.array(coefs, dtype=float)])

    if npairs:
        k = np.arange(npairs)
        zi = n + k
        pi = np.array([p[0] for p in pairs])
        pj = np.array([p[1] for p in pairs])
        # rows 3k: x_i + x_j - z <= 1; 3k+1: z - x_i <= 0; 3k+2: z - x_j <= 0
        r0, r1, r2 = 3 * k, 3 * k + 1, 3 * k + 2
        rows = np.concatenate([r0, r0, r0, r1, r1, r2, r2])
        cols = np.concatenate([pi, pj, zi, zi, pi, zi, pj])
        vals = np.concatenate([
            np.ones(npairs), np.ones(npairs), -np.ones(npairs),
            np.ones(npairs), -np.ones(npairs), np.ones(npairs), -np.ones(npairs),
        ])
        mc = sp.csr_matrix((vals, (rows, cols)), shape=(3 * npairs, total))
        mc_b = np.tile([1.0, 0.0, 0.0], npairs)
    else:
        mc = sp.csr_matrix((0, total))
        mc_b = np.zeros(0)

    A_orig = sp.hstack([problem.A, sp.csr_matrix((problem.m, npairs))], format="csr")
    base = Problem(
        n=total,
        c=c_ext,
        h_rows=np.zeros(0, dtype=np.int64),
        h_cols=np.zeros(0, dtype=np.int64),
        h_vals=np.zeros(0),
        A=sp.vstack([A_orig, mc], format="csr"),
        b=np.concatenate([problem.b, mc_b]),
        senses=problem.senses + (LE,) * (3 * npairs),
        binaries=problem.binaries,
        lb=np.concatenate([problem.lb, np.zeros(npairs)]),
        ub=np.concatenate([problem.ub, np.ones(npairs)]),
        name=problem.name,
    )
    return LinearizedProblem(base=base, z_index=z_index, original_n=n, offset=offset)


def lift_point(lin: LinearizedProblem, x) -> np.ndarray:
    """Extend an original point with ``z_ij = x_i x_j``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lin.original_n,):
        raise ProblemError(f"point has length {x.shape}, expected {lin.original_n}")
    ext = np.zeros(lin.base.n)
    ext[: lin.original_n] = x
    for (i, j), k in lin.z_index.items():
        ext[k] = x[i] * x[j]
    return ext


def recover_binary_point(lin: LinearizedProblem, x_ext) -> np.ndarray:
    x_ext = np.asarray(x_ext, dtype=float)
    if x_ext.shape != (lin.base.n,):
        raise ProblemError(f"point has length {x_ext.shape}, expected {lin.base.n}")
    return x_ext[: lin.original_n].copy()
