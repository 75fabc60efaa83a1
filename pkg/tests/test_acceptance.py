"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line with the measured
numbers before asserting.  The sizes and tolerances here are the targets;
do not shrink them to make a run pass.
"""

import itertools
import json
import math

import numpy as np
import pytest

from relaxsearch import (
    METHODS, BnbConfig, GenSpec, HeuristicConfig, IncumbentTrace, branch_and_bound, brute_force,
    build_hessian_graph, check_feasibility, eval_objective, fix_variables, gen_instance,
    greedy_matching_cover, make_problem, mccormick_linearize, min_vertex_cover, primal_gap,
    primal_integral, relax_search, snap_binaries, solve_lp_relaxation, solve_nlp_relaxation,
)
from relaxsearch.cli import main as cli_main
from relaxsearch.core import SolveStatus
from relaxsearch.formats import MEAN_ROW, read_report, read_trace
from relaxsearch.heuristics import RELAXATION_FAILED
from relaxsearch.metrics import compile_best_known
from relaxsearch.reformulate import lift_point
from relaxsearch.wflop import (
    WindDistribution, WflopSpec, brute_force_layouts, build_wflop_problem, make_grid,
    sample_scenarios,
)

pytestmark = pytest.mark.slow

FAMILIES = ("CBQP", "CQKP", "QMKP")


@pytest.fixture
def verdict(capsys):
    def emit(k: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    return emit


def small_instance(family: str, k: int):
    rng = np.random.default_rng([k, FAMILIES.index(family)])
    n = int(rng.integers(4, 15))
    spec = GenSpec(family, n, density=float(rng.uniform(0.2, 0.9)), n_knapsack=3,
                   seed=1000 * FAMILIES.index(family) + k)
    return gen_instance(spec, f"{family.lower()}_{k}")


@pytest.fixture(scope="module")
def oracle_suite():
    """200 instances per family with their brute-force optima."""
    suite = []
    for fam in FAMILIES:
        for k in range(200):
            p = small_instance(fam, k)
            suite.append((p, brute_force(p)))
    return suite


# 1 -------------------------------------------------------------------------

def test_c1_bnb_matches_brute_force(oracle_suite, verdict):
    bad = []
    for p, bf in oracle_suite:
        r = branch_and_bound(p, BnbConfig(time_limit=60.0))
        if bf.x is None or not bf.feasible:
            ok = r.solution is None and r.status is SolveStatus.INFEASIBLE
        else:
            ok = (r.status is SolveStatus.OPTIMAL and r.solution is not None
                  and abs(r.solution.objective - bf.objective) <= 1e-9)
        if not ok:
            bad.append(p.name)
    verdict(1, not bad, f"{len(oracle_suite) - len(bad)}/{len(oracle_suite)} optimal and equal "
                        f"to brute force; mismatches {bad[:5]}")
    assert not bad


# 2 -------------------------------------------------------------------------

def test_c2_mccormick_objective_is_exact(verdict):
    worst = 0.0
    for k in range(50):
        rng = np.random.default_rng(k)
        n = int(rng.integers(2, 31))
        p = gen_instance(GenSpec(FAMILIES[k % 3], n, density=float(rng.uniform(0.1, 1.0)),
                                 n_knapsack=2, seed=k))
        lin = mccormick_linearize(p)
        X = rng.integers(0, 2, (1000, n)).astype(float)
        lifted = np.stack([lift_point(lin, x) for x in X])
        # z_ij must equal x_i x_j at every binary point
        for (i, j), col in lin.z_index.items():
            assert np.array_equal(lifted[:, col], X[:, i] * X[:, j])
        got = lifted @ lin.base.c
        want = eval_objective(p, X)
        rel = np.abs(got - want) / np.maximum(1.0, np.abs(want))
        worst = max(worst, float(rel.max()))
    verdict(2, worst <= 1e-9, f"worst relative error {worst:.2e} over 50 x 1000 points")
    assert worst <= 1e-9


# 3 -------------------------------------------------------------------------

def test_c3_lp_relaxation_is_a_lower_bound(oracle_suite, verdict):
    bad = []
    for p, bf in oracle_suite:
        if bf.x is None or not bf.feasible:
            continue
        lp = solve_lp_relaxation(p)
        if lp.status is not SolveStatus.OPTIMAL or lp.objective > bf.objective + 1e-7:
            bad.append((p.name, lp.status.value, lp.objective, bf.objective))
    verdict(3, not bad, f"{len(oracle_suite) - len(bad)}/{len(oracle_suite)} bounds valid; "
                        f"violations {bad[:3]}")
    assert not bad


# 4 -------------------------------------------------------------------------

def _exhaustive_min_cover(graph):
    for k in range(len(graph.vertices) + 1):
        for sub in itertools.combinations(graph.vertices, k):
            if graph.is_cover(sub):
                return k


def test_c4_vertex_covers(verdict):
    problems = []
    for k in range(100):
        rng = np.random.default_rng(500 + k)
        n = int(rng.integers(2, 13))
        dens = rng.uniform(0.1, 0.8)
        H = [(i, j, float(rng.integers(1, 9))) for i in range(n) for j in range(i + 1, n)
             if rng.random() < dens]
        H += [(i, i, 1.0) for i in range(n) if rng.random() < 0.3]
        p = make_problem(n, c=rng.normal(size=n), H=H)
        g = build_hessian_graph(p)
        for cover in (min_vertex_cover(g), greedy_matching_cover(g),
                      min_vertex_cover(g, deadline=0.0)):
            if not g.is_cover(cover.members):
                problems.append((k, "not a cover"))
            if cover.certified_minimum and len(cover) != _exhaustive_min_cover(g):
                problems.append((k, "not minimum"))
            fixed = fix_variables(p, {j: int(rng.integers(0, 2)) for j in cover.members})
            free = fixed.lb < fixed.ub
            live = [(i, j) for i, j in zip(fixed.h_rows, fixed.h_cols)
                    if i != j and free[i] and free[j]]
            if live:
                problems.append((k, "residual bilinear terms"))
        if not min_vertex_cover(g).certified_minimum:
            problems.append((k, "not certified within the default budget"))
    verdict(4, not problems, f"100 graphs, problems {problems[:5]}")
    assert not problems


# 5 -------------------------------------------------------------------------

GAP_TABLE = [
    # (v, v_star, expected)
    (0.0, 0.0, 0.0),
    (-0.0, 0.0, 0.0),
    (5.0, -3.0, 1.0),
    (-3.0, 5.0, 1.0),
    (1e-12, -1e-12, 1.0),
    (-100.0, 2.0, 1.0),
    (None, -3.0, 1.0),
    (None, 0.0, 1.0),
    (-3.0, None, 1.0),
    (None, None, 1.0),
    (-90.0, -100.0, 0.1),
    (-100.0, -100.0, 0.0),
    (110.0, 100.0, 10.0 / 110.0),
    (100.0, 100.0, 0.0),
    (0.0, -5.0, 1.0),
    (-5.0, 0.0, 1.0),
    (3.0, 0.0, 1.0),
    (-1.0, -4.0, 0.75),
    (2.5, 2.0, 0.2),
    (-1e6, -1e6 - 1.0, 1.0 / (1e6 + 1.0)),
]


def test_c5_metric_fidelity(verdict):
    misses = [(v, w, e, primal_gap(v, w)) for v, w, e in GAP_TABLE
              if abs(primal_gap(v, w) - e) > 1e-12]
    empty = primal_integral(IncumbentTrace(), -10.0, 60.0)
    unknown = primal_integral(IncumbentTrace(), None, 60.0)
    ok = not misses and empty == 60.0 and unknown == 60.0 and len(GAP_TABLE) == 20
    verdict(5, ok, f"{20 - len(misses)}/20 gap cases, empty-trace integral {empty}")
    assert ok, misses


# 6 -------------------------------------------------------------------------

FUZZ_METHODS = ("relax_search", "cover_relax_search", "rens", "undercover")


def test_c6_heuristic_fuzz_feasibility(verdict):
    runs, bad, errors, found = 0, [], [], 0
    for k in range(125):
        rng = np.random.default_rng(9000 + k)
        n = (30, 60)[k % 2]
        fam = FAMILIES[k % 3]
        p = gen_instance(GenSpec(fam, n, density=float(rng.uniform(0.05, 0.5)),
                                 n_knapsack=int(rng.integers(1, 6)), seed=9000 + k))
        cfg = HeuristicConfig(p=float(rng.uniform(0.0, 1.0)), total_limit=5.0,
                              relaxation=("LP", "NLP")[int(rng.integers(0, 2))], seed=k)
        for m in FUZZ_METHODS:
            runs += 1
            try:
                r = METHODS[m](p, cfg)
            except Exception as exc:  # noqa: BLE001 - counting, not handling
                errors.append((p.name, m, repr(exc)))
                continue
            if r.solution is not None:
                found += 1
                if not check_feasibility(p, r.solution.x).feasible:
                    bad.append((p.name, m))
    ok = runs == 500 and not bad and not errors
    verdict(6, ok, f"{runs} runs, {found} solutions, {len(bad)} infeasible, {len(errors)} "
                   f"exceptions {errors[:2]}")
    assert ok


# 7 -------------------------------------------------------------------------

def test_c7_relax_search_beats_rens_on_cqkp(verdict):
    T = 10.0
    integrals = {"relax_search": [], "rens": []}
    rens_failures = 0
    for s in range(20):
        p = gen_instance(GenSpec("CQKP", 100, density=0.1, seed=s))
        cfg = HeuristicConfig(p=0.7, total_limit=T, relaxation="NLP")
        res = {m: METHODS[m](p, cfg) for m in integrals}
        v_star = compile_best_known(res.values())
        for m, r in res.items():
            integrals[m].append(primal_integral(r.trace, v_star, T))
        r = res["rens"]
        if r.failure_reason == RELAXATION_FAILED or primal_gap(r.objective, v_star) == 1.0:
            rens_failures += 1
    rs, rens = np.mean(integrals["relax_search"]), np.mean(integrals["rens"])
    reduction = 1.0 - rs / rens if rens > 0 else 0.0
    ok_integral = rs <= 0.8 * rens
    ok_failure = rens_failures >= 1
    verdict(7, ok_integral and ok_failure,
            f"mean integral relax_search {rs:.3f} vs rens {rens:.3f} (reduction "
            f"{100 * reduction:.0f}%, need >= 20%); rens failure-mode runs {rens_failures} "
            f"(need >= 1)")
    assert ok_integral, "primal integral reduction below 20%"
    assert ok_failure, "rens never hit RelaxationFailed or a gap-1 cutoff"


# 8 -------------------------------------------------------------------------

def test_c8_degenerate_p(verdict):
    p0_bad, p1_bad, p1_checked = [], [], 0
    for k in range(20):
        fam = FAMILIES[k % 3]
        p = small_instance(fam, 700 + k)
        r0 = relax_search(p, HeuristicConfig(p=0.0, total_limit=60.0))
        bnb = branch_and_bound(p, BnbConfig(time_limit=60.0))
        want = bnb.solution.objective if bnb.solution else None
        if r0.objective != want:
            p0_bad.append((p.name, r0.objective, want))

        r1 = relax_search(p, HeuristicConfig(p=1.0, total_limit=60.0))
        x_bar = solve_nlp_relaxation(p, mode="FirstLocal").x
        if x_bar is None:
            continue
        xr = snap_binaries(p, x_bar)
        if check_feasibility(p, xr).feasible:
            p1_checked += 1
            if r1.objective != eval_objective(p, xr):
                p1_bad.append((p.name, r1.objective, float(eval_objective(p, xr))))
    ok = not p0_bad and not p1_bad and p1_checked > 0
    verdict(8, ok, f"p=0: {20 - len(p0_bad)}/20 match branch-and-bound; p=1: "
                   f"{p1_checked - len(p1_bad)}/{p1_checked} feasible roundings reproduced")
    assert ok, (p0_bad, p1_bad)


# 9 -------------------------------------------------------------------------

def _wake_loss_double_sum(coords, scen, a, alpha, r0, layout):
    """Independent evaluation of the expected wake loss of a layout."""
    ux, uy = math.cos(scen.theta), math.sin(scen.theta)
    total = 0.0
    on = [i for i, v in enumerate(layout) if v == 1]
    for i in on:
        for j in on:
            if i == j:
                continue
            x = (coords[j][0] - coords[i][0]) * ux + (coords[j][1] - coords[i][1]) * uy
            d = 2 * a / (1 + alpha * x / r0) ** 2 if x > 0 else 0.0
            total += d * d
    return scen.prob * scen.U * total


def test_c9_wflop_end_to_end(verdict):
    hits, gaps = 0, []
    for seed in range(10):
        scen = sample_scenarios(WindDistribution(), 1, seed)
        spec = WflopSpec(make_grid(5, 5), scen, 3)
        p = build_wflop_problem(spec)
        _, best = brute_force_layouts(spec, p)
        r = relax_search(p, HeuristicConfig(p=0.7, total_limit=10.0, relaxation="NLP"))
        g = primal_gap(r.objective, best)
        gaps.append(round(g, 4))
        hits += g <= 0.05

    scen = sample_scenarios(WindDistribution(), 1, 123)[0]
    spec = WflopSpec(make_grid(5, 5), [scen], 3)
    p = build_wflop_problem(spec)
    coords = [tuple(c) for c in spec.grid.coords]
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        y = np.zeros(25)
        y[rng.choice(25, 3, replace=False)] = 1
        ref = _wake_loss_double_sum(coords, scen, spec.params.a, spec.params.alpha,
                                    spec.params.r0, y)
        got = float(eval_objective(p, y))
        worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    ok_gap, ok_eval = hits >= 9, worst <= 1e-9
    verdict(9, ok_gap and ok_eval,
            f"gap <= 0.05 on {hits}/10 seeds (need 9), gaps {gaps}; "
            f"objective vs double sum worst rel err {worst:.1e}")
    assert ok_eval
    assert ok_gap


# 10 ------------------------------------------------------------------------

def _fingerprint(r):
    return (r.objective, tuple(r.fixed_set), r.failure_reason,
            tuple(v for _, v in r.trace.entries))


def test_c10_determinism(verdict, tmp_path):
    diffs = []
    # node caps, not clocks, end every search here: budgets are never reached
    for k in range(4):
        p = gen_instance(GenSpec(FAMILIES[k % 3], 30, density=0.3, seed=77 + k))
        for m in METHODS:
            cfg = HeuristicConfig(p=0.6, total_limit=300.0, relax_limit=100.0, cover_limit=100.0,
                                  seed=k, node_limit=100)
            a, b = METHODS[m](p, cfg), METHODS[m](p, cfg)
            if _fingerprint(a) != _fingerprint(b):
                diffs.append((p.name, m))

    suite = {"methods": list(METHODS), "time_limit": 300.0, "p": 0.6, "node_limit": 100,
             "relax_limit": 100.0, "cover_limit": 100.0,
             "generate": [{"family": "QMKP", "n": 30, "count": 2, "seed": 5}], "workers": 1}
    (tmp_path / "suite.json").write_text(json.dumps(suite))
    runs = []
    for tag in ("a", "b"):
        assert cli_main(["bench", str(tmp_path / "suite.json"), "--outdir",
                         str(tmp_path / tag)]) == 0
        rows = read_report(tmp_path / tag / "report.csv")
        cells = [(r["instance"], r["method"], r["objective"], r["fixed_count"], r["status"])
                 for r in rows if r["instance"] != MEAN_ROW]
        traces = {r["trace_file"]: [v for _, v in read_trace(tmp_path / tag / r["trace_file"]).entries]
                  for r in rows if r["instance"] != MEAN_ROW}
        runs.append((cells, traces))
    if runs[0] != runs[1]:
        diffs.append(("bench", "report"))
    verdict(10, not diffs, f"{4 * len(METHODS)} solve pairs and one bench pair; differences {diffs}")
    assert not diffs
