import itertools

import numpy as np
import pytest

from relaxsearch.core import make_problem
from relaxsearch.instgen import GenSpec, gen_instance


def random_mbqp(seed, n=None, family=None):
    """Small instance from one of the generator families, or an unconstrained
    box QP, chosen by seed.  Used wherever an enumeration oracle applies."""
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(4, 13))
    family = family or ["CBQP", "CQKP", "QMKP", "BOX"][seed % 4]
    if family == "BOX":
        trip = [(i, j, float(rng.integers(-20, 21))) for i in range(n) for j in range(i, n)
                if rng.random() < 0.4]
        return make_problem(n, c=rng.integers(-20, 21, n).astype(float), H=trip, name=f"box{seed}")
    spec = GenSpec(family, n, density=float(rng.uniform(0.2, 0.8)), n_knapsack=3, seed=seed)
    return gen_instance(spec)


def lp_vertex_oracle(c, A, b, senses, lb, ub):
    """Minimum of a tiny LP over its vertices, by solving every square
    subsystem of active constraints.  Returns ``None`` when infeasible."""
    A = np.asarray(A, float)
    m, n = A.shape
    # all constraints as G x (<=|=) h, bounds included
    G = np.vstack([A, -np.eye(n), np.eye(n)])
    h = np.concatenate([b, -np.asarray(lb, float), np.asarray(ub, float)])
    eq = np.array([s == "=" for s in senses] + [False] * (2 * n))
    eq_rows = list(np.flatnonzero(eq))
    other = list(np.flatnonzero(~eq))
    combos = np.array([eq_rows + list(e) for e in itertools.combinations(other, n - len(eq_rows))])
    M, rhs = G[combos], h[combos]
    ok = np.abs(np.linalg.det(M)) > 1e-10
    X = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    R = X @ G.T - h
    feas = np.all(np.where(eq, np.abs(R), R) <= 1e-9, axis=1)
    if not feas.any():
        return None
    return float((X[feas] @ c).min())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
