"""Wind farm layout optimization as an MBQP.

Choose ``K`` of the grid locations so that the expected wake loss

    sum_m p_m U_m sum_i sum_j d_ij(m)^2 y_i y_j

is minimal, where ``d_ij(m)`` is the Jensen far-wake speed deficit at
location ``j`` caused by a turbine at ``i`` in scenario ``m``.  A scenario's
``theta`` is the direction the wind travels toward, in radians measured from
the +x axis.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import EQ, Problem, ProblemError, make_problem


@dataclass(frozen=True)
class Grid:
    coords: np.ndarray  # (|J|, 2) in meters

    def __post_init__(self) -> None:
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ProblemError("grid coordinates must be an (n, 2) array")
        if len({tuple(p) for p in c.tolist()}) != len(c):
            raise ProblemError("grid positions must be distinct")
        object.__setattr__(self, "coords", c)

    def __len__(self) -> int:
        return len(self.coords)


def make_grid(nx: int, ny: int, spacing: float = 200.0) -> Grid:
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="xy")
    return Grid(np.column_stack([xs.ravel(), ys.ravel()]))


@dataclass(frozen=True)
class WindScenario:
    U: float
    theta: float
    prob: float

    def __post_init__(self) -> None:
        if self.U < 0 or self.prob < 0:
            raise ProblemError("wind speed and probability must be nonnegative")


@dataclass(frozen=True)
class WakeParams:
    a: float = 1.0 / 3.0
    alpha: float = 0.1
    r0: float = 40.0

    def __post_init__(self) -> None:
        if not 0 < self.a < 1 or self.alpha <= 0 or self.r0 <= 0:
            raise ProblemError("need 0 < a < 1, alpha > 0, r0 > 0")


@dataclass(frozen=True)
class WflopSpec:
    grid: Grid
    scenarios: tuple[WindScenario, ...]
    K: int
    params: WakeParams = field(default_factory=WakeParams)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not 1 <= self.K <= len(self.grid):
            raise ProblemError(f"K={self.K} must lie in [1, {len(self.grid)}]")
        if not self.scenarios:
            raise ProblemError("at least one wind scenario is required")
        total = sum(s.prob for s in self.scenarios)
        if abs(total - 1.0) > 1e-9:
            raise ProblemError(f"scenario probabilities sum to {total}, expected 1")


def _jensen(x: np.ndarray | float, params: WakeParams):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = 2.0 * params.a / (1.0 + params.alpha * x / params.r0) ** 2
    return np.where(x > 0, d, 0.0)


def wake_deficit(loc_i, loc_j, scenario: WindScenario, params: WakeParams = WakeParams()) -> float:
    """Deficit at ``loc_j`` caused by a turbine at ``loc_i`` (zero unless ``j`` is downwind)."""
    (xi, yi), (xj, yj) = loc_i, loc_j
    if xi == xj and yi == yj:
        return 0.0
    dist = (xj - xi) * math.cos(scenario.theta) + (yj - yi) * math.sin(scenario.theta)
    return float(_jensen(dist, params))


def deficit_matrix(grid: Grid, scenario: WindScenario, params: WakeParams = WakeParams()) -> np.ndarray:
    """``D[i, j] = d_ij`` for every ordered pair of grid locations."""
    c = grid.coords
    dx = c[None, :, 0] - c[:, None, 0]
    dy = c[None, :, 1] - c[:, None, 1]
    D = _jensen(dx * math.cos(scenario.theta) + dy * math.sin(scenario.theta), params)
    np.fill_diagonal(D, 0.0)
    return D


def loss_weights(spec: WflopSpec) -> np.ndarray:
    """``W[i, j] = sum_m p_m U_m d_ij(m)^2``."""
    W = np.zeros((len(spec.grid), len(spec.grid)))
    for s in spec.scenarios:
        W += s.prob * s.U * deficit_matrix(spec.grid, s, spec.params) ** 2
    return W


def build_wflop_problem(spec: WflopSpec, name: str = "wflop") -> Problem:
    n = len(spec.grid)
    W = loss_weights(spec)
    S = W + W.T
    iu, ju = np.triu_indices(n, k=1)
    # an off-diagonal triplet counts twice in x^T H x
    vals = S[iu, ju] / 2.0
    keep = vals != 0
    H = zip(iu[keep].tolist(), ju[keep].tolist(), vals[keep].tolist())
    return make_problem(n, c=np.zeros(n), H=H, A=np.ones((1, n)), b=[float(spec.K)],
                        senses=[EQ], name=name)


def expected_wake_loss(spec: WflopSpec, layout) -> float:
    """Direct double sum over scenarios and location pairs, no matrix form."""
    y = np.asarray(layout, dtype=float)
    coords = spec.grid.coords
    total = 0.0
    for s in spec.scenarios:
        acc = 0.0
        for i in range(len(coords)):
            if y[i] == 0:
                continue
            for j in range(len(coords)):
                if y[j] == 0:
                    continue
                acc += wake_deficit(coords[i], coords[j], s, spec.params) ** 2 * y[i] * y[j]
        total += s.prob * s.U * acc
    return total


@dataclass(frozen=True)
class DirectionMode:
    weight: float
    mean_deg: float
    kappa: float


@dataclass(frozen=True)
class WindDistribution:
    """Weibull speeds and a von Mises mixture of directions, or a fixed
    empirical scenario list when ``scenarios`` is given."""

    weibull_shape: float = 2.0
    weibull_scale: float = 9.0
    directions: tuple[DirectionMode, ...] = (DirectionMode(0.7, 300.0, 4.0), DirectionMode(0.3, 150.0, 2.0))
    scenarios: tuple[WindScenario, ...] | None = None

    def __post_init__(self) -> None:
        if self.scenarios is not None:
            return
        if self.weibull_shape <= 0 or self.weibull_scale <= 0:
            raise ProblemError("Weibull shape and scale must be positive")
        if not self.directions or any(d.weight < 0 or d.kappa < 0 for d in self.directions):
            raise ProblemError("direction modes need nonnegative weights and concentrations")
        if sum(d.weight for d in self.directions) <= 0:
            raise ProblemError("direction mode weights sum to zero")

    @classmethod
    def from_dict(cls, data: dict) -> "WindDistribution":
        if "scenarios" in data:
            scen = tuple(WindScenario(float(s["speed_mps"]), math.radians(float(s["direction_deg"])),
                                      float(s["prob"])) for s in data["scenarios"])
            return cls(scenarios=scen)
        modes = tuple(DirectionMode(float(d["weight"]), float(d["mean_deg"]), float(d["kappa"]))
                      for d in data.get("directions", []))
        kw = {}
        if modes:
            kw["directions"] = modes
        return cls(weibull_shape=float(data.get("weibull_shape", 2.0)),
                   weibull_scale=float(data.get("weibull_scale", 9.0)), **kw)

    @classmethod
    def load(cls, path) -> "WindDistribution":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_scenarios(dist: WindDistribution, M: int, seed) -> list[WindScenario]:
    """``M`` equiprobable scenarios.  An empirical distribution is resampled
    with its own probabilities as weights."""
    if M < 1:
        raise ProblemError("M must be at least 1")
    rng = np.random.default_rng(seed)
    if dist.scenarios is not None:
        pool = dist.scenarios
        w = np.array([s.prob for s in pool], dtype=float)
        idx = rng.choice(len(pool), size=M, p=w / w.sum())
        picks = [(pool[k].U, pool[k].theta) for k in idx]
    else:
        weights = np.array([d.weight for d in dist.directions], dtype=float)
        modes = rng.choice(len(dist.directions), size=M, p=weights / weights.sum())
        speeds = dist.weibull_scale * rng.weibull(dist.weibull_shape, size=M)
        picks = []
        for k, mode in enumerate(modes):
            d = dist.directions[mode]
            theta = rng.vonmises(math.radians(d.mean_deg), d.kappa) % (2 * math.pi)
            picks.append((float(speeds[k]), float(theta)))
    return [WindScenario(U, theta, 1.0 / M) for U, theta in picks]


SCENARIO_FIELDS = ("speed_mps", "direction_deg", "prob")


def write_scenarios(path, scenarios: Sequence[WindScenario]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCENARIO_FIELDS)
        for s in scenarios:
            w.writerow([repr(s.U), repr(math.degrees(s.theta)), repr(s.prob)])


def read_scenarios(path) -> list[WindScenario]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(SCENARIO_FIELDS) - set(rows[0]):
        raise ProblemError(f"{path}: expected columns {', '.join(SCENARIO_FIELDS)}")
    return [WindScenario(float(r["speed_mps"]), math.radians(float(r["direction_deg"])), float(r["prob"]))
            for r in rows]


def brute_force_layouts(spec: WflopSpec, problem: Problem | None = None) -> tuple[np.ndarray, float]:
    """Best layout over all ``C(|J|, K)`` placements (exhaustive)."""
    from itertools import combinations

    from .core import eval_objective

    problem = problem or build_wflop_problem(spec)
    n = len(spec.grid)
    combos = np.array(list(combinations(range(n), spec.K)), dtype=np.int64)
    best_y, best = None, np.inf
    for lo in range(0, len(combos), 1 << 14):
        block = combos[lo: lo + (1 << 14)]
        Y = np.zeros((len(block), n))
        np.put_along_axis(Y, block, 1.0, axis=1)
        vals = eval_objective(problem, Y)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, best_y = float(vals[k]), Y[k].copy()
    return best_y, float(eval_objective(problem, best_y))
