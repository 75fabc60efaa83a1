"""Seeded generators for the synthetic benchmark families.

* ``CBQP``: cardinality-constrained binary QP, ``sum x = K``.
* ``CQKP``: cardinality-constrained quadratic knapsack, ``sum x <= K`` plus
  one knapsack row.
* ``QMKP``: quadratic multidimensional knapsack with ``n_knapsack`` rows.

Coefficient ranges, ``K = floor(n / 4)`` and the 50% capacities are defaults
chosen here; every one is a keyword argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EQ, LE, Problem, ProblemError, check_feasibility, make_problem

FAMILIES = ("CBQP", "CQKP", "QMKP")

# name -> (n, density, n_knapsack)
PROFILES = {
    "small": (500, 0.1, 50),
    "large": (1000, 0.1, 50),
    "desk50": (50, 0.1, 5),
    "desk100": (100, 0.1, 10),
}


@dataclass(frozen=True)
class GenSpec:
    family: str
    n: int
    density: float = 0.1
    n_knapsack: int = 50
    seed: int = 0
    coef_range: int = 100
    weight_range: tuple[int, int] = (1, 50)
    capacity_ratio: float = 0.5
    cardinality_ratio: float = 0.25

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ProblemError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 2:
            raise ProblemError("n must be at least 2")
        if not 0 < self.density <= 1:
            raise ProblemError("density must lie in (0, 1]")
        if self.family == "QMKP" and self.n_knapsack < 1:
            raise ProblemError("QMKP needs at least one knapsack row")

    @property
    def cardinality(self) -> int:
        return int(np.floor(self.n * self.cardinality_ratio))


def gen_h_matrix(n: int, density: float, seed, coef_range: int = 100) -> list[tuple[int, int, float]]:
    """Random upper-triangle triplets: off-diagonals kept with probability
    ``density`` and drawn from the nonzero integers in ``[-coef_range, coef_range]``;
    diagonals uniform in the same range (zeros dropped)."""
    rng = np.random.default_rng(seed)
    return _h_triplets(rng, n, density, coef_range)


def _nonzero_ints(rng: np.random.Generator, size: int, bound: int) -> np.ndarray:
    v = rng.integers(1, bound + 1, size=size)
    return np.where(rng.random(size) < 0.5, -v, v)


def _h_triplets(rng, n, density, coef_range):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < density
    iu, ju = iu[keep], ju[keep]
    off = _nonzero_ints(rng, len(iu), coef_range)
    diag = rng.integers(-coef_range, coef_range + 1, size=n)
    trip = [(int(i), int(i), float(v)) for i, v in enumerate(diag) if v != 0]
    trip += [(int(i), int(j), float(v)) for i, j, v in zip(iu, ju, off)]
    trip.sort()
    return trip


def gen_instance(spec: GenSpec, name: str | None = None) -> Problem:
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    H = _h_triplets(rng, n, spec.density, spec.coef_range)
    c = rng.integers(-spec.coef_range, spec.coef_range + 1, size=n).astype(float)
    K = spec.cardinality
    lo_w, hi_w = spec.weight_range
    rows, rhs, senses = [], [], []
    if spec.family == "CBQP":
        rows.append(np.ones(n))
        rhs.append(float(K))
        senses.append(EQ)
    elif spec.family == "CQKP":
        w = rng.integers(lo_w, hi_w + 1, size=n).astype(float)
        rows += [np.ones(n), w]
        rhs += [float(K), float(np.floor(spec.capacity_ratio * w.sum()))]
        senses += [LE, LE]
    else:
        for _ in range(spec.n_knapsack):
            w = rng.integers(lo_w, hi_w + 1, size=n).astype(float)
            rows.append(w)
            rhs.append(float(np.floor(spec.capacity_ratio * w.sum())))
            senses.append(LE)
    problem = make_problem(
        n, c=c, H=H, A=np.array(rows), b=rhs, senses=senses,
        name=name or f"{spec.family.lower()}_n{n}_s{spec.seed}",
    )
    witness = feasible_witness(problem, spec)
    if not check_feasibility(problem, witness).feasible:
        raise ProblemError("generated instance has no constructive feasible point")
    return problem


def feasible_witness(problem: Problem, spec: GenSpec) -> np.ndarray:
    """A point certifying feasibility: the first ``K`` variables for CBQP, zero otherwise."""
    x = np.zeros(problem.n)
    if spec.family == "CBQP":
        x[: spec.cardinality] = 1.0
    return x


def gen_suite(family: str, n: int, count: int, seed: int, **kw) -> list[Problem]:
    """``count`` instances with consecutive seeds starting at ``seed``."""
    return [gen_instance(GenSpec(family=family, n=n, seed=seed + k, **kw)) for k in range(count)]
