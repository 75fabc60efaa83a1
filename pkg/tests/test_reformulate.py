import numpy as np
import pytest

from relaxsearch.core import ProblemError, check_feasibility, eval_objective, make_problem
from relaxsearch.reformulate import (
    UnsupportedStructureError, lift_point, mccormick_linearize, recover_binary_point,
)
from relaxsearch.relax import lp_minimize
from conftest import random_mbqp


def test_offdiagonal_coefficient_doubles():
    p = make_problem(2, H=[(0, 1, 3.0)])
    lin = mccormick_linearize(p)
    assert lin.z_index == {(0, 1): 2}
    np.testing.assert_array_equal(lin.base.c, [0, 0, 6])
    assert lin.base.m == 3
    assert len(lin.base.h_vals) == 0


def test_diagonal_folds_into_linear_term():
    p = make_problem(3, c=[1, 0, 0], H=[(0, 0, 5.0)])
    lin = mccormick_linearize(p)
    assert lin.z_index == {}
    assert lin.base.c[0] == 6.0
    assert lin.base.n == 3


def test_original_rows_copied():
    p = make_problem(3, H=[(0, 2, 1.0)], A=[[1, 1, 1]], b=[2], senses=["="])
    lin = mccormick_linearize(p)
    np.testing.assert_array_equal(lin.base.A.toarray()[0], [1, 1, 1, 0])
    assert lin.base.senses[0] == "=" and lin.base.b[0] == 2


def test_continuous_bilinear_rejected():
    p = make_problem(2, H=[(0, 1, 1.0)], binaries=[0], lb=[0, 0], ub=[1, 5])
    with pytest.raises(UnsupportedStructureError):
        mccormick_linearize(p)


@pytest.mark.parametrize("seed", range(6))
def test_linearized_objective_matches_at_binary_points(seed):
    p = random_mbqp(seed, n=10)
    lin = mccormick_linearize(p)
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, (1000, 10)).astype(float)
    for x in X[:50]:
        ext = lift_point(lin, x)
        assert lin.base.c @ ext == pytest.approx(eval_objective(p, x), rel=1e-12, abs=1e-12)
    # vectorised pass over all points
    Z = np.stack([lift_point(lin, x) for x in X])
    np.testing.assert_allclose(Z @ lin.base.c, eval_objective(p, X), rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("x", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_mccormick_rows_force_product_at_binaries(x):
    # with x fixed, the z interval left by the rows is exactly {x0 * x1}
    p = make_problem(2, H=[(0, 1, 1.0)])
    lin = mccormick_linearize(p)
    b = lin.base
    A = b.A.toarray()
    lb = np.array([x[0], x[1], 0.0])
    ub = np.array([x[0], x[1], 1.0])
    lo = lp_minimize(np.array([0, 0, 1.0]), A, b.b, b.senses, (lb, ub))
    hi = lp_minimize(np.array([0, 0, -1.0]), A, b.b, b.senses, (lb, ub))
    assert lo.x[2] == pytest.approx(x[0] * x[1])
    assert hi.x[2] == pytest.approx(x[0] * x[1])


def test_lifted_binary_points_are_feasible():
    p = random_mbqp(9, n=8)
    lin = mccormick_linearize(p)
    rng = np.random.default_rng(1)
    for x in rng.integers(0, 2, (100, 8)).astype(float):
        ext = lift_point(lin, x)
        assert check_feasibility(lin.base, ext).feasible == check_feasibility(p, x).feasible


def test_substitute_fixed_is_exact_on_box():
    p = random_mbqp(11, n=9)
    from relaxsearch.core import fix_variables
    q = fix_variables(p, {0: 1, 3: 0, 5: 1})
    full = mccormick_linearize(q)
    small = mccormick_linearize(q, substitute_fixed=True)
    assert small.base.n <= full.base.n
    rng = np.random.default_rng(0)
    for x in rng.integers(0, 2, (200, 9)).astype(float):
        x[[0, 3, 5]] = [1, 0, 1]
        v = small.base.c @ lift_point(small, x) + small.offset
        assert v == pytest.approx(eval_objective(q, x), abs=1e-9)


def test_recover_binary_point():
    p = make_problem(3, H=[(0, 1, 2.0), (1, 2, 1.0)])
    lin = mccormick_linearize(p)
    ext = np.array([1, 0, 1, 0.3, 0.7])
    np.testing.assert_array_equal(recover_binary_point(lin, ext), [1, 0, 1])
    with pytest.raises(ProblemError):
        recover_binary_point(lin, [1, 0, 1])


def test_recover_identity_without_auxiliaries():
    p = make_problem(3, H=[(1, 1, 2.0)])
    lin = mccormick_linearize(p)
    np.testing.assert_array_equal(recover_binary_point(lin, [0, 1, 1]), [0, 1, 1])


def test_lift_recover_round_trip():
    p = random_mbqp(4, n=10)
    lin = mccormick_linearize(p)
    rng = np.random.default_rng(4)
    for x in rng.integers(0, 2, (100, 10)).astype(float):
        np.testing.assert_array_equal(recover_binary_point(lin, lift_point(lin, x)), x)
