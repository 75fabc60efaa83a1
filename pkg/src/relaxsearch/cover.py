"""Hessian graph of an MBQP and vertex covers of it.

Fixing every variable of a vertex cover leaves an objective that is linear in
the remaining free variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Deadline, Problem, SolveStatus, as_deadline, make_problem
from .subsolve import BnbConfig, branch_and_bound


@dataclass(frozen=True)
class HessianGraph:
    vertices: tuple[int, ...]
    edges: frozenset[tuple[int, int]]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def is_cover(self, members) -> bool:
        s = set(members)
        return all(i in s or j in s for i, j in self.edges)


@dataclass(frozen=True)
class Cover:
    members: frozenset[int]
    certified_minimum: bool

    def __len__(self) -> int:
        return len(self.members)


def build_hessian_graph(problem: Problem) -> HessianGraph:
    off = problem.h_rows != problem.h_cols
    rows, cols = problem.h_rows[off].tolist(), problem.h_cols[off].tolist()
    edges = frozenset(zip(rows, cols))
    vertices = tuple(sorted(set(rows) | set(cols)))
    return HessianGraph(vertices=vertices, edges=edges)


def graph_from_edges(edges) -> HessianGraph:
    norm = frozenset((min(i, j), max(i, j)) for i, j in edges if i != j)
    return HessianGraph(tuple(sorted({v for e in norm for v in e})), norm)


def greedy_matching_cover(graph: HessianGraph) -> Cover:
    """Both endpoints of a maximal matching built in lexicographic edge order."""
    matched: set[int] = set()
    for i, j in graph.sorted_edges():
        if i not in matched and j not in matched:
            matched.update((i, j))
    return Cover(frozenset(matched), certified_minimum=False)


def cover_problem(graph: HessianGraph) -> Problem:
    """The covering MILP ``min sum a_v  s.t.  a_i + a_j >= 1`` over graph vertices."""
    pos = {v: k for k, v in enumerate(graph.vertices)}
    edges = graph.sorted_edges()
    A = np.zeros((len(edges), len(pos)))
    for r, (i, j) in enumerate(edges):
        A[r, pos[i]] = A[r, pos[j]] = 1.0
    return make_problem(len(pos), c=np.ones(len(pos)), A=A, b=np.ones(len(edges)),
                        senses=[">="] * len(edges), name="vertex_cover")


def min_vertex_cover(graph: HessianGraph, deadline: Deadline | float | None = 1.0,
                     max_nodes: int | None = None) -> Cover:
    """Minimum vertex cover via branch-and-bound within ``deadline``.

    The greedy matching cover is the warm start, so when time or the node
    cap runs out the best cover found (never larger than the greedy one)
    comes back with ``certified_minimum=False``.
    """
    if not graph.edges:
        return Cover(frozenset(), certified_minimum=True)
    dl = as_deadline(deadline)
    greedy = greedy_matching_cover(graph)
    problem = cover_problem(graph)
    ws = np.array([1.0 if v in greedy.members else 0.0 for v in graph.vertices])
    result = branch_and_bound(problem, BnbConfig(warm_start=ws, max_nodes=max_nodes), deadline=dl)
    if result.solution is None:
        return greedy
    members = frozenset(v for v, a in zip(graph.vertices, result.solution.x) if a > 0.5)
    certified = result.status is SolveStatus.OPTIMAL
    if not certified and len(members) >= len(greedy.members):
        return greedy
    return Cover(members, certified_minimum=certified)


def residual_hessian_graph(problem: Problem, fixed) -> HessianGraph:
    """Hessian graph restricted to pairs where neither endpoint is in ``fixed``."""
    fixed = set(fixed)
    g = build_hessian_graph(problem)
    return graph_from_edges((i, j) for i, j in g.edges if i not in fixed and j not in fixed)
