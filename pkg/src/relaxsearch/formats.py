"""On-disk formats: instance JSON, incumbent trace CSV, bench report CSV.

Instance documents look like::

    {"name": "toy", "n": 3,
     "c": [1.0, 0.0, -2.5],
     "H": [[0, 1, 3.0], [2, 2, -1.0]],
     "rows": [{"coefs": [[0, 1.0], [1, 1.0]], "sense": "<=", "rhs": 1.0}],
     "binaries": [0, 1, 2],
     "bounds": [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]}

``H`` holds upper-triangle triplets ``i <= j``; an off-diagonal triplet
counts twice in ``x^T H x``.  Floats are written with ``repr`` precision,
so a load/dump cycle is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import Problem, ProblemError, make_problem
from .subsolve import IncumbentTrace

TRACE_FIELDS = ("time_s", "objective")
REPORT_FIELDS = (
    "instance", "method", "status", "objective", "v_star", "primal_gap", "primal_integral",
    "time_limit_s", "relax_s", "cover_s", "subsolve_s", "fixed_count", "trace_file",
)
MEAN_ROW = "__mean__"


def problem_to_dict(problem: Problem) -> dict:
    A = problem.A.tocsr()
    rows = []
    for r in range(problem.m):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        coefs = [[int(j), float(v)] for j, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        rows.append({"coefs": coefs, "sense": problem.senses[r], "rhs": float(problem.b[r])})
    return {
        "name": problem.name,
        "n": problem.n,
        "c": [float(v) for v in problem.c],
        "H": [[i, j, v] for i, j, v in problem.h_triplets()],
        "rows": rows,
        "binaries": sorted(problem.binaries),
        "bounds": [[float(l), float(u)] for l, u in zip(problem.lb, problem.ub)],
    }


def problem_from_dict(doc: dict) -> Problem:
    missing = {"n", "c", "H", "rows", "binaries", "bounds"} - set(doc)
    if missing:
        raise ProblemError(f"instance document lacks fields {sorted(missing)}")
    n = int(doc["n"])
    A = np.zeros((len(doc["rows"]), n))
    b, senses = [], []
    for r, row in enumerate(doc["rows"]):
        for j, v in row["coefs"]:
            A[r, int(j)] += float(v)
        b.append(float(row["rhs"]))
        senses.append(row["sense"])
    bounds = np.asarray(doc["bounds"], dtype=float).reshape(-1, 2) if n else np.zeros((0, 2))
    if len(bounds) != n:
        raise ProblemError(f"expected {n} bound pairs, got {len(bounds)}")
    return make_problem(n, c=doc["c"], H=[tuple(t) for t in doc["H"]], A=A, b=b, senses=senses,
                        binaries=doc["binaries"], lb=bounds[:, 0], ub=bounds[:, 1],
                        name=str(doc.get("name", "")))


def save_problem(problem: Problem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem)) + "\n")


def load_problem(path) -> Problem:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"instance file {path} not found")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: not valid JSON ({exc})") from exc
    problem = problem_from_dict(doc)
    if not problem.name:
        problem = problem.replace(name=path.stem)
    return problem


def write_trace(trace: IncumbentTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for t, v in trace.entries:
            w.writerow([repr(float(t)), repr(float(v))])


def read_trace(path) -> IncumbentTrace:
    trace = IncumbentTrace()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(TRACE_FIELDS):
            raise ProblemError(f"{path}: expected header {','.join(TRACE_FIELDS)}")
        for row in reader:
            trace.entries.append((float(row["time_s"]), float(row["objective"])))
    return trace


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_FIELDS)
        for row in rows:
            w.writerow([_cell(row.get(k)) for k in REPORT_FIELDS])


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(REPORT_FIELDS):
            raise ProblemError(f"{path}: unexpected report columns")
        return list(reader)
