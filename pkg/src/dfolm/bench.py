"""Batch benchmark grid, convergence test, and performance profiles.

Grid cells (problem, start scale, solver, repetition) run independently in
a thread pool capped by DFOLM_THREADS; per-cell seeds derive from the base
seed and the cell identity, so parallel and sequential runs emit identical
records. Records and profile curves serialise to CSV with a fixed column
order (see RECORD_COLUMNS and CURVE_COLUMNS).
"""
from __future__ import annotations

import csv
import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .problems import get_problem
from .solver import OVERFLOW, SolverConfig, run_solver

SOLVER_IDS = ("dflm-fd", "dflm-ossv1", "dflm-ossv2")
_METHOD_OF = {"dflm-fd": "fd", "dflm-ossv1": "ossv1", "dflm-ossv2": "ossv2"}
_SHORT_OF = {"fd": "dflm-fd", "ossv1": "dflm-ossv1", "ossv2": "dflm-ossv2"}

DETERMINISTIC_SCALES = (1, 10, 100)

RECORD_COLUMNS = (
    "problem_id", "solver_id", "rep", "seed", "start_scale",
    "niter", "nf", "f_final", "status", "converged",
)
CURVE_COLUMNS = ("solver_id", "alpha", "pi")


@dataclass(frozen=True)
class BenchRecord:
    problem_id: str
    solver_id: str
    rep: int
    seed: int
    start_scale: int
    niter: int
    nf: int
    f_final: float
    status: str
    converged: bool
    wall_time: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class ProfileCurve:
    solver_id: str
    breakpoints: tuple[tuple[float, float], ...]   # (alpha, pi), alpha >= 1, pi nondecreasing


def canonical_solver_id(name: str) -> str:
    if name in _METHOD_OF:
        return name
    if name in _SHORT_OF:
        return _SHORT_OF[name]
    raise ValueError(f"unknown solver id: {name}")


def derive_seed(base_seed: int, problem_id: str, solver_id: str, rep: int) -> int:
    """Deterministic per-cell seed: base_seed xor a stable hash of the cell identity."""
    digest = hashlib.sha256(f"{problem_id}|{solver_id}|{rep}".encode()).digest()
    return (int.from_bytes(digest[:8], "little") ^ base_seed) & (2**63 - 1)


def convergence_test(f_final: float, f_star: Optional[float], tau: float) -> bool:
    """|f_final - f_star| <= tau; False when no reference value is known."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if f_star is None:
        return False
    return abs(f_final - f_star) <= tau


def _grid_cells(
    problem_ids: Sequence[str], solver_ids: Sequence[str], reps: int
) -> list[tuple[str, int, str, int]]:
    cells = []
    for pid in problem_ids:
        problem = get_problem(pid)
        scales = (1,) if problem.random_start else DETERMINISTIC_SCALES
        for scale in scales:
            for sid in solver_ids:
                for rep in range(reps):
                    cells.append((pid, scale, sid, rep))
    return sorted(cells)


def _run_cell(
    pid: str, scale: int, sid: str, rep: int, base_seed: int, tau: float,
    cfg_overrides: Optional[dict], check_invariants: bool,
) -> tuple[BenchRecord, list[str]]:
    problem = get_problem(pid)
    seed = derive_seed(base_seed, pid, sid, rep)
    overrides = dict(cfg_overrides or {})
    cfg = SolverConfig(method=_METHOD_OF[sid], seed=seed, **overrides)
    rng = np.random.default_rng(seed)
    if problem.random_start:
        x0 = 10.0 * rng.standard_normal(problem.n)
    else:
        x0 = problem.x0 * float(scale)
    start = time.perf_counter()
    result = run_solver(problem, cfg, rng=rng, x0=x0, check_invariants=check_invariants)
    wall = time.perf_counter() - start
    converged = result.status != OVERFLOW and convergence_test(result.f_final, problem.f_star, tau)
    record = BenchRecord(
        problem_id=pid, solver_id=sid, rep=rep, seed=seed, start_scale=scale,
        niter=result.niter, nf=result.nf, f_final=result.f_final,
        status=result.status, converged=converged, wall_time=wall,
    )
    return record, result.invariant_violations


def _worker_count(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get("DFOLM_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def run_grid(
    problem_ids: Sequence[str],
    solver_ids: Sequence[str],
    reps: int,
    base_seed: int,
    tau: float,
    cfg_overrides: Optional[dict] = None,
    check_invariants: bool = False,
    threads: Optional[int] = None,
) -> list[BenchRecord]:
    """One record per (problem, start scale, solver, rep) cell.

    Problems with random starts draw x0 = 10 * standard normal from the
    cell's seeded stream and run at scale 1 only; problems with a stored
    start run at scales 1, 10, 100. With check_invariants, any violated
    per-iteration inequality raises RuntimeError.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    solver_ids = [canonical_solver_id(s) for s in solver_ids]
    for pid in problem_ids:
        get_problem(pid)   # fail fast on unknown ids
    cells = _grid_cells(problem_ids, solver_ids, reps)

    def work(cell):
        pid, scale, sid, rep = cell
        return _run_cell(pid, scale, sid, rep, base_seed, tau, cfg_overrides, check_invariants)

    workers = _worker_count(threads)
    if workers == 1:
        outcomes = [work(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, cells))

    violations = [v for _, vs in outcomes for v in vs]
    if violations:
        raise RuntimeError("invariant violations:\n" + "\n".join(violations))
    return [record for record, _ in outcomes]


def _group_by_cell(records: Iterable[BenchRecord]) -> dict[tuple[str, int, str], list[BenchRecord]]:
    groups: dict[tuple[str, int, str], list[BenchRecord]] = {}
    for rec in records:
        groups.setdefault((rec.problem_id, rec.start_scale, rec.solver_id), []).append(rec)
    return groups


def performance_profile(
    records: Sequence[BenchRecord],
    tau: float,
    solvers: Optional[Sequence[str]] = None,
    f_star_of: Optional[Callable[[str], Optional[float]]] = None,
) -> list[ProfileCurve]:
    """Step functions pi_s(alpha) = fraction of problems with cost ratio <= alpha.

    A profile problem is a (problem id, start scale) pair. The cost
    t_{p,s} is the mean nf over converged repetitions, infinite when fewer
    than half of the repetitions converge; ratios divide by the best
    solver's cost. Convergence is re-evaluated at the given tau from
    f_final against the problem's reference value.
    """
    if not records:
        raise ValueError("empty record set")
    if f_star_of is None:
        f_star_of = lambda pid: get_problem(pid).f_star
    if solvers is None:
        solvers = sorted({rec.solver_id for rec in records})
    groups = _group_by_cell(records)
    problems = sorted({(pid, scale) for pid, scale, _ in groups})
    n_p = len(problems)

    costs: dict[tuple[str, int, str], float] = {}
    for (pid, scale) in problems:
        for sid in solvers:
            cell = groups.get((pid, scale, sid), [])
            if not cell:
                costs[(pid, scale, sid)] = math.inf
                continue
            f_star = f_star_of(pid)
            good = [
                rec.nf for rec in cell
                if rec.status != OVERFLOW and convergence_test(rec.f_final, f_star, tau)
            ]
            if 2 * len(good) >= len(cell):
                costs[(pid, scale, sid)] = float(np.mean(good))
            else:
                costs[(pid, scale, sid)] = math.inf

    ratios: dict[str, list[float]] = {sid: [] for sid in solvers}
    for (pid, scale) in problems:
        best = min(costs[(pid, scale, sid)] for sid in solvers)
        for sid in solvers:
            t = costs[(pid, scale, sid)]
            ratios[sid].append(t / best if math.isfinite(t) else math.inf)

    curves = []
    for sid in solvers:
        r = np.array(ratios[sid])
        alphas = sorted({1.0, *(float(v) for v in r if math.isfinite(v))})
        breakpoints = tuple((a, float(np.sum(r <= a)) / n_p) for a in alphas)
        curves.append(ProfileCurve(solver_id=sid, breakpoints=breakpoints))
    return curves


def emit_csv(items: Sequence, path: str, kind: Optional[str] = None) -> None:
    """Write records or curves; kind ('records' or 'curves') disambiguates empty lists."""
    if kind is None:
        if not items:
            raise ValueError("cannot infer csv kind from an empty list")
        kind = "records" if isinstance(items[0], BenchRecord) else "curves"
    if kind == "records":
        _emit_records(items, path)
    elif kind == "curves":
        _emit_curves(items, path)
    else:
        raise ValueError(f"unknown csv kind: {kind}")


def _emit_records(records: Sequence[BenchRecord], path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.problem_id, rec.solver_id, rec.rep, rec.seed, rec.start_scale,
                    rec.niter, rec.nf, repr(rec.f_final), rec.status,
                    str(rec.converged).lower(),
                ]
            )


def _emit_curves(curves: Sequence[ProfileCurve], path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CURVE_COLUMNS)
        for curve in curves:
            for alpha, pi in curve.breakpoints:
                writer.writerow([curve.solver_id, repr(alpha), repr(pi)])


def parse_records_csv(path: str) -> list[BenchRecord]:
    records = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise ValueError(f"unexpected record columns in {path}: {reader.fieldnames}")
        for row in reader:
            records.append(
                BenchRecord(
                    problem_id=row["problem_id"], solver_id=row["solver_id"],
                    rep=int(row["rep"]), seed=int(row["seed"]),
                    start_scale=int(row["start_scale"]), niter=int(row["niter"]),
                    nf=int(row["nf"]), f_final=float(row["f_final"]),
                    status=row["status"], converged=row["converged"] == "true",
                )
            )
    return records


def parse_curves_csv(path: str) -> list[ProfileCurve]:
    rows: dict[str, list[tuple[float, float]]] = {}
    order: list[str] = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != CURVE_COLUMNS:
            raise ValueError(f"unexpected curve columns in {path}: {reader.fieldnames}")
        for row in reader:
            sid = row["solver_id"]
            if sid not in rows:
                rows[sid] = []
                order.append(sid)
            rows[sid].append((float(row["alpha"]), float(row["pi"])))
    return [ProfileCurve(sid, tuple(rows[sid])) for sid in order]
