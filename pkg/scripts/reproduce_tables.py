#!/usr/bin/env python3
"""Print benchmark tables: Niter/NF per problem, start scale, and solver.

Deterministic-start problems report a single run per solver; random-start
problems report means over --reps seeded repetitions (matching how the
harness aggregates them). Use --quick for a reduced sweep.
"""
import argparse

import numpy as np

from dfolm import SUITE_IDS, run_grid

QUICK_IDS = ("ex1", "ex4", "mgh1-mod-n2", "mgh23-mod-n10")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=60, help="repetitions for randomised runs")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tau", type=float, default=1e-3)
    parser.add_argument("--quick", action="store_true", help="small problem subset, 5 reps")
    args = parser.parse_args()

    problem_ids = QUICK_IDS if args.quick else SUITE_IDS
    reps = 5 if args.quick else args.reps
    records = run_grid(problem_ids, ["fd", "ossv1", "ossv2"], reps=reps,
                       base_seed=args.seed, tau=args.tau)

    cells = {}
    for rec in records:
        cells.setdefault((rec.problem_id, rec.start_scale, rec.solver_id), []).append(rec)

    print(f"{'problem':16s} {'x0':>4s}  {'dflm-fd':>14s}  {'dflm-ossv1':>14s}  {'dflm-ossv2':>14s}")
    for pid in problem_ids:
        scales = sorted({s for (p, s, _) in cells if p == pid})
        for scale in scales:
            row = [f"{pid:16s} {scale:4d}"]
            for sid in ("dflm-fd", "dflm-ossv1", "dflm-ossv2"):
                group = cells[(pid, scale, sid)]
                if any(r.status == "Overflow" for r in group) and all(
                    r.status == "Overflow" or not r.converged for r in group
                ):
                    row.append(f"{'OF':>14s}")
                else:
                    niter = np.mean([r.niter for r in group])
                    nf = np.mean([r.nf for r in group])
                    row.append(f"{niter:7.1f}/{nf:6.0f}")
            print("  ".join(row))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
