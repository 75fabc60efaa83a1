"""Command-line harness.

Subcommands::

    relaxsearch gen        --family CQKP --n 100 --count 20 --seed 0 --outdir inst/
    relaxsearch wflop-gen  --grid 5x5 --K 3 --M 1 --seed 0 --out farm.json
    relaxsearch solve      inst/cqkp_n100_s0.json --method relax_search --time-limit 10
    relaxsearch bench      suite.json --outdir results/
    relaxsearch report     results/report.csv

Exit status is 0 on success and 2 on a usage, configuration or input error.
``RELAXSEARCH_WORKERS`` sets the number of parallel bench workers (default 1).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .core import ProblemError
from .formats import (
    MEAN_ROW, load_problem, read_report, read_trace, save_problem, write_report, write_trace,
)
from .heuristics import METHODS, HeuristicConfig
from .instgen import FAMILIES, PROFILES, GenSpec, gen_instance
from .metrics import compile_best_known, primal_gap, primal_integral
from .wflop import (
    WakeParams, WflopSpec, WindDistribution, build_wflop_problem, make_grid, read_scenarios,
    sample_scenarios, write_scenarios,
)

log = logging.getLogger(__name__)

WORKERS_ENV = "RELAXSEARCH_WORKERS"
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _instance_name(family: str, n: int, seed: int) -> str:
    return f"{family.lower()}_n{n}_s{seed}"


def cmd_gen(args) -> int:
    if args.profile:
        n, density, n_knap = PROFILES[args.profile]
    else:
        if args.n is None:
            raise ConfigError("give --n or --profile")
        n, density, n_knap = args.n, 0.1, 50
    density = args.density if args.density is not None else density
    n_knap = args.n_knapsack if args.n_knapsack is not None else n_knap
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        seed = args.seed + k
        name = _instance_name(args.family, n, seed)
        spec = GenSpec(args.family, n, density=density, n_knapsack=n_knap, seed=seed)
        path = outdir / f"{name}.json"
        save_problem(gen_instance(spec, name), path)
        print(path)
    return 0


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"grid must look like 10x10, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise ConfigError("grid dimensions must be positive")
    return nx, ny


def cmd_wflop_gen(args) -> int:
    nx, ny = _parse_grid(args.grid)
    if args.scenarios_in:
        scenarios = read_scenarios(args.scenarios_in)
    else:
        dist = WindDistribution.load(args.dist) if args.dist else WindDistribution()
        scenarios = sample_scenarios(dist, args.M, args.seed)
    params = WakeParams(a=args.a, alpha=args.alpha, r0=args.r0)
    spec = WflopSpec(make_grid(nx, ny, args.spacing), scenarios, args.K, params)
    name = Path(args.out).stem
    save_problem(build_wflop_problem(spec, name), args.out)
    if args.scenarios_out:
        write_scenarios(args.scenarios_out, scenarios)
    print(args.out)
    return 0


def _config_from(opts: dict) -> HeuristicConfig:
    try:
        return HeuristicConfig(
            p=float(opts.get("p", 0.7)),
            total_limit=float(opts.get("time_limit", 60.0)),
            relax_limit=opts.get("relax_limit"),
            cover_limit=opts.get("cover_limit"),
            relaxation=opts.get("relaxation", "NLP"),
            seed=int(opts.get("seed", 0)),
            nlp_mode=opts.get("nlp_mode", "FirstLocal"),
            tie_break=opts.get("tie_break", "flip_cost"),
            node_limit=opts.get("node_limit"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _method(name: str):
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return METHODS[name]


def cmd_solve(args) -> int:
    method = _method(args.method)
    config = _config_from({
        "p": args.p, "time_limit": args.time_limit, "relax_limit": args.tr, "cover_limit": args.tc,
        "relaxation": args.relaxation, "seed": args.seed, "nlp_mode": args.nlp_mode,
        "tie_break": args.tie_break, "node_limit": args.node_limit,
    })
    problem = load_problem(args.instance)
    result = method(problem, config)
    if args.trace_out:
        write_trace(result.trace, args.trace_out)
    if args.solution_out and result.solution is not None:
        Path(args.solution_out).write_text(json.dumps([float(v) for v in result.solution.x]) + "\n")
    summary = {
        "instance": problem.name,
        "method": args.method,
        "objective": result.objective,
        "failure_reason": result.failure_reason,
        "fixed_count": len(result.fixed_set),
        "phase_times": result.phase_times,
        "incumbents": len(result.trace),
    }
    print(json.dumps(summary, indent=2))
    return 0


# bench ---------------------------------------------------------------------

def _load_suite(path: Path) -> tuple[dict, list[tuple[str, object]]]:
    if not path.exists():
        raise ConfigError(f"suite config {path} not found")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(cfg, dict) or not cfg.get("methods"):
        raise ConfigError("suite config needs a non-empty 'methods' list")
    for m in cfg["methods"]:
        _method(m)
    _config_from(cfg)  # validate budgets early
    jobs: list[tuple[str, object]] = []
    for rel in cfg.get("instances", []):
        p = (path.parent / rel) if not Path(rel).is_absolute() else Path(rel)
        if not p.exists():
            raise ConfigError(f"instance file {p} not found")
        jobs.append((p.stem, p))
    for g in cfg.get("generate", []):
        try:
            family, n = g["family"], int(g["n"])
            count, seed = int(g.get("count", 1)), int(g.get("seed", 0))
            extra = {k: g[k] for k in ("density", "n_knapsack") if k in g}
            for k in range(count):
                spec = GenSpec(family, n, seed=seed + k, **extra)
                jobs.append((_instance_name(family, n, seed + k), spec))
        except (KeyError, TypeError, ProblemError) as exc:
            raise ConfigError(f"bad generator entry {g}: {exc}") from exc
    if not jobs:
        raise ConfigError("suite config lists no instances")
    names = [name for name, _ in jobs]
    if len(set(names)) != len(names):
        raise ConfigError("instance names in the suite must be unique")
    return cfg, jobs


def _run_cell(name: str, source, method: str, opts: dict) -> dict:
    problem = load_problem(source) if isinstance(source, Path) else gen_instance(source, name)
    result = METHODS[method](problem, _config_from(opts))
    return {
        "instance": name, "method": method, "result": result,
    }


def _workers(cfg: dict) -> int:
    raw = os.environ.get(WORKERS_ENV, cfg.get("workers", 1))
    try:
        w = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if w < 1:
        raise ConfigError("worker count must be at least 1")
    return w


def assemble_rows(cells: list[dict], horizon: float) -> list[dict]:
    """Per-run rows plus one ``__mean__`` row per method.

    ``cells`` carry ``instance``, ``method``, ``status``, ``objective`` and
    a ``trace``; v* is the best objective over each instance's methods.
    """
    by_inst: dict[str, list[dict]] = {}
    for c in cells:
        by_inst.setdefault(c["instance"], []).append(c)
    rows = []
    for inst, group in by_inst.items():
        v_star = compile_best_known(c["objective"] for c in group)
        for c in group:
            rows.append({
                **{k: c.get(k) for k in ("instance", "method", "status", "objective", "relax_s",
                                         "cover_s", "subsolve_s", "fixed_count", "trace_file")},
                "v_star": v_star,
                "primal_gap": primal_gap(c["objective"], v_star),
                "primal_integral": primal_integral(c["trace"], v_star, horizon),
                "time_limit_s": horizon,
            })
    methods = list(dict.fromkeys(r["method"] for r in rows))
    for m in methods:
        mine = [r for r in rows if r["method"] == m]
        ok = sum(r["objective"] is not None for r in mine)
        mean = {}
        for k in ("primal_gap", "primal_integral", "relax_s", "cover_s", "subsolve_s"):
            vals = [r[k] for r in mine if r.get(k) is not None]
            mean[k] = float(np.mean(vals)) if vals else None
        rows.append({"instance": MEAN_ROW, "method": m, "status": f"solved {ok}/{len(mine)}",
                     "time_limit_s": horizon, **mean})
    return rows


def cmd_bench(args) -> int:
    suite = Path(args.suite)
    cfg, jobs = _load_suite(suite)
    outdir = Path(args.outdir or cfg.get("outdir", "bench_out"))
    if not outdir.is_absolute() and args.outdir is None:
        outdir = suite.parent / outdir
    (outdir / "traces").mkdir(parents=True, exist_ok=True)
    workers = _workers(cfg)
    tasks = [(name, src, m, cfg) for name, src in jobs for m in cfg["methods"]]
    if workers == 1:
        done = [_run_cell(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_cell, *zip(*tasks)))
    cells = []
    for d in done:
        r = d["result"]
        trace_file = f"traces/{d['instance']}__{d['method']}.csv"
        write_trace(r.trace, outdir / trace_file)
        cells.append({
            "instance": d["instance"], "method": d["method"],
            "status": r.failure_reason or "ok",
            "objective": r.objective, "trace": r.trace,
            "relax_s": r.phase_times["relax"], "cover_s": r.phase_times["cover"],
            "subsolve_s": r.phase_times["subsolve"], "fixed_count": len(r.fixed_set),
            "trace_file": trace_file,
        })
    rows = assemble_rows(cells, float(cfg.get("time_limit", 60.0)))
    write_report(rows, outdir / "report.csv")
    _print_means(rows)
    print(outdir / "report.csv")
    return 0


def _print_means(rows: list[dict]) -> None:
    for r in rows:
        if r["instance"] == MEAN_ROW:
            print(f"{r['method']:>20s}  gap={float(r['primal_gap']):.4f}  "
                  f"integral={float(r['primal_integral']):.3f}  {r['status']}")


def cmd_report(args) -> int:
    path = Path(args.report)
    if not path.exists():
        raise ConfigError(f"report {path} not found")
    cells = []
    horizon = None
    for row in read_report(path):
        if row["instance"] == MEAN_ROW:
            continue
        trace = read_trace(path.parent / row["trace_file"])
        horizon = float(row["time_limit_s"])
        cells.append({
            "instance": row["instance"], "method": row["method"], "status": row["status"],
            "objective": trace.best, "trace": trace,
            **{k: float(row[k]) for k in ("relax_s", "cover_s", "subsolve_s")},
            "fixed_count": int(row["fixed_count"]), "trace_file": row["trace_file"],
        })
    if not cells:
        raise ConfigError(f"{path} holds no per-run rows")
    rows = assemble_rows(cells, horizon)
    out = Path(args.out) if args.out else path
    write_report(rows, out)
    _print_means(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relaxsearch", description="MBQP primal heuristics toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate synthetic instances")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--profile", choices=sorted(PROFILES))
    g.add_argument("--density", type=float)
    g.add_argument("--n-knapsack", type=int)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--outdir", required=True)
    g.set_defaults(func=cmd_gen)

    w = sub.add_parser("wflop-gen", help="build a wind farm layout instance")
    w.add_argument("--grid", default="10x10", help="NXxNY candidate locations")
    w.add_argument("--spacing", type=float, default=200.0, help="grid spacing in meters")
    w.add_argument("--K", type=int, default=10, help="turbine count")
    w.add_argument("--M", type=int, default=1, help="number of sampled scenarios")
    w.add_argument("--dist", help="wind distribution JSON")
    w.add_argument("--scenarios-in", help="scenario CSV to use instead of sampling")
    w.add_argument("--scenarios-out", help="write the scenarios used to this CSV")
    w.add_argument("--a", type=float, default=1.0 / 3.0)
    w.add_argument("--alpha", type=float, default=0.1)
    w.add_argument("--r0", type=float, default=40.0)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_wflop_gen)

    s = sub.add_parser("solve", help="run one method on one instance")
    s.add_argument("instance")
    s.add_argument("--method", default="relax_search")
    s.add_argument("--p", type=float, default=0.7)
    s.add_argument("--tr", type=float, help="relaxation budget (s)")
    s.add_argument("--tc", type=float, help="cover budget (s)")
    s.add_argument("--time-limit", type=float, default=60.0)
    s.add_argument("--relaxation", choices=("LP", "NLP"), default="NLP")
    s.add_argument("--nlp-mode", default="FirstLocal", choices=("FirstFeasible", "FirstLocal", "Improve"))
    s.add_argument("--tie-break", default="flip_cost", choices=("flip_cost", "index"))
    s.add_argument("--node-limit", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace-out")
    s.add_argument("--solution-out")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a suite of methods and instances")
    b.add_argument("suite")
    b.add_argument("--outdir")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="recompute a report from its trace files")
    r.add_argument("report")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ProblemError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
