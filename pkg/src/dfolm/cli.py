"""Command-line interface.

Subcommands
    bench run      run a (problems x solvers x reps) grid, write records.csv
    bench profile  derive performance-profile curves from a records directory
    probe run      run a statistical probe, write a JSON report
    solve          run one solver on one problem, print a JSON result

Solver names: fd, ossv1, ossv2 (records carry dflm-fd, dflm-ossv1,
dflm-ossv2). The work pool size is capped by the DFOLM_THREADS environment
variable.

File formats
    records.csv  problem_id,solver_id,rep,seed,start_scale,niter,nf,f_final,status,converged
    curves.csv   solver_id,alpha,pi
    trace.csv    k,theta,lambda,rho,norm_r,norm_grad_model,norm_d,gamma,accepted,nf_cumulative
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench, probes
from .problems import SUITE_IDS, get_problem
from .solver import SolverConfig, run_solver, trace_to_csv


def _parse_problems(arg: str) -> list[str]:
    if arg == "all":
        return list(SUITE_IDS)
    return [p.strip() for p in arg.split(",") if p.strip()]


def _cmd_bench_run(args) -> int:
    problem_ids = _parse_problems(args.problems)
    solver_ids = [s.strip() for s in args.solvers.split(",") if s.strip()]
    records = bench.run_grid(
        problem_ids, solver_ids, reps=args.reps, base_seed=args.seed, tau=args.tau,
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "records.csv")
    bench.emit_csv(records, path, kind="records")
    print(f"wrote {len(records)} records to {path}")
    return 0


def _cmd_bench_profile(args) -> int:
    path = os.path.join(args.input, "records.csv") if os.path.isdir(args.input) else args.input
    records = bench.parse_records_csv(path)
    curves = bench.performance_profile(records, tau=args.tau)
    bench.emit_csv(curves, args.out, kind="curves")
    print(f"wrote {sum(len(c.breakpoints) for c in curves)} breakpoints to {args.out}")
    return 0


def _cmd_probe_run(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.probe == "bias":
        probe = probes.quadratic_probe(n=6, m=5, seed=args.seed)
        x = np.linspace(0.5, 1.5, 6)
        report = probes.probe_bias(probe, x, gamma=0.1, b=3, n_samples=10_000, rng=rng)
    elif args.probe == "variance":
        probe = probes.quadratic_probe(n=6, m=5, seed=args.seed)
        x = np.linspace(0.5, 1.5, 6)
        report = probes.probe_variance(probe, x, gamma=0.1, b=3, n_samples=10_000, rng=rng)
    else:
        alpha, eta, p0 = 0.5, 0.5, 1e-3
        probe = probes.quadratic_probe(n=8, m=6, seed=args.seed, scale=0.1)
        b = probes.min_sampling_size(8, alpha, eta, p0)
        cfg = SolverConfig(method="ossv1", b=b, seed=args.seed, max_iter=200)
        result = run_solver(probe.problem, cfg, rng=rng, x0=np.full(8, 2.0), keep_points=True)
        report = probes.probe_event_rate(probe, result, alpha, eta, p0, rng, trials=2000, b=b)
    with open(args.out, "w") as handle:
        handle.write(report.to_json() + "\n")
    print(f"wrote {args.probe} report to {args.out}")
    return 0


def _cmd_solve(args) -> int:
    problem = get_problem(args.problem)
    solver_id = bench.canonical_solver_id(args.solver)
    cfg = SolverConfig(method=solver_id.removeprefix("dflm-"), seed=args.seed)
    rng = np.random.default_rng(args.seed)
    if problem.random_start:
        x0 = 10.0 * rng.standard_normal(problem.n)
    else:
        x0 = problem.x0 * float(args.scale)
    result = run_solver(problem, cfg, rng=rng, x0=x0)
    if args.trace:
        trace_to_csv(result.trace, args.trace)
    payload = {
        "problem": problem.name,
        "solver": solver_id,
        "x_final": [float(v) for v in result.x_final],
        "f_final": result.f_final,
        "norm_grad_model_final": result.norm_grad_model_final,
        "status": result.status,
        "niter": result.niter,
        "nf": result.nf,
    }
    print(json.dumps(payload, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfolm", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="benchmark grid and profiles")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p_run = bench_sub.add_parser("run", help="run a solver grid")
    p_run.add_argument("--problems", default="all", help="'all' or comma-separated ids")
    p_run.add_argument("--solvers", default="fd,ossv1,ossv2")
    p_run.add_argument("--reps", type=int, default=60)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--tau", type=float, default=1e-3)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=_cmd_bench_run)

    p_prof = bench_sub.add_parser("profile", help="compute profile curves from records")
    p_prof.add_argument("--in", dest="input", required=True, help="records.csv or its directory")
    p_prof.add_argument("--tau", type=float, default=1e-3)
    p_prof.add_argument("--out", required=True, help="curves csv path")
    p_prof.set_defaults(func=_cmd_bench_profile)

    p_probe = sub.add_parser("probe", help="statistical probes")
    probe_sub = p_probe.add_subparsers(dest="probe_command", required=True)
    p_probe_run = probe_sub.add_parser("run", help="run one probe")
    p_probe_run.add_argument("--probe", choices=("bias", "variance", "event-rate"), required=True)
    p_probe_run.add_argument("--seed", type=int, default=0)
    p_probe_run.add_argument("--out", required=True, help="JSON report path")
    p_probe_run.set_defaults(func=_cmd_probe_run)

    p_solve = sub.add_parser("solve", help="run one solver on one problem")
    p_solve.add_argument("--problem", required=True)
    p_solve.add_argument("--solver", default="fd")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--scale", type=int, default=1, choices=(1, 10, 100))
    p_solve.add_argument("--trace", default=None, help="optional trace csv path")
    p_solve.set_defaults(func=_cmd_solve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
