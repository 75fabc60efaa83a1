"""Primal gap, primal integral and best-known values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .subsolve import IncumbentTrace


@dataclass(frozen=True)
class GapPoint:
    time: float
    gap: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.gap <= 1.0:
            raise ValueError(f"gap {self.gap} outside [0, 1]")


def primal_gap(v: Optional[float], v_star: Optional[float]) -> float:
    """Normalized distance between ``v`` and the best known ``v_star``.

    1 when ``v`` is missing, when no reference exists, or when the signs differ.
    """
    if v is None or v_star is None:
        return 1.0
    if v == 0 and v_star == 0:
        return 0.0
    if v * v_star < 0:
        return 1.0
    return abs(v - v_star) / max(abs(v), abs(v_star))


def gap_curve(trace: IncumbentTrace, v_star: Optional[float]) -> list[GapPoint]:
    return [GapPoint(0.0, 1.0)] + [GapPoint(t, primal_gap(v, v_star)) for t, v in trace.entries]


def primal_integral(trace: IncumbentTrace, v_star: Optional[float], horizon: float) -> float:
    """Integral over ``[0, horizon]`` of the step function of incumbent gaps."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    total = 0.0
    t_prev, g_prev = 0.0, 1.0
    for t, v in trace.entries:
        t = min(max(t, 0.0), horizon)
        total += g_prev * (t - t_prev)
        t_prev, g_prev = t, primal_gap(v, v_star)
    total += g_prev * (horizon - t_prev)
    return total


def compile_best_known(results: Iterable) -> Optional[float]:
    """Minimum objective over feasible solutions of a list of results.

    Accepts anything with a ``solution`` attribute holding ``objective``, or
    bare numbers / ``None``.
    """
    best = None
    for r in results:
        if r is None:
            continue
        if isinstance(r, (int, float)):
            v = float(r)
        else:
            sol = getattr(r, "solution", None)
            if sol is None or not sol.feasible:
                continue
            v = sol.objective
        if best is None or v < best:
            best = v
    return best
