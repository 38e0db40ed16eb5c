#!/usr/bin/env python3
"""Full benchmark chain: grid run, profile curves, optional figure.

Writes records.csv and one curves CSV per tolerance into --out. When the
profile_plots package is installed, also renders a figure per tolerance.
"""
import argparse
import os
import shutil
import subprocess
import sys

from dfolm import SUITE_IDS, emit_csv, parse_records_csv, performance_profile, run_grid


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="bench-out")
    parser.add_argument("--reps", type=int, default=60)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--taus", default="1e-3,1e-5")
    parser.add_argument("--quick", action="store_true", help="3 reps, for smoke runs")
    args = parser.parse_args()

    reps = 3 if args.quick else args.reps
    taus = [float(t) for t in args.taus.split(",")]
    os.makedirs(args.out, exist_ok=True)

    records_path = os.path.join(args.out, "records.csv")
    if os.path.exists(records_path):
        print(f"reusing {records_path}")
        records = parse_records_csv(records_path)
    else:
        records = run_grid(SUITE_IDS, ["fd", "ossv1", "ossv2"], reps=reps,
                           base_seed=args.seed, tau=min(taus))
        emit_csv(records, records_path, kind="records")
        print(f"wrote {records_path} ({len(records)} records)")

    for tau in taus:
        curves = performance_profile(records, tau=tau)
        curves_path = os.path.join(args.out, f"curves-tau{tau:g}.csv")
        emit_csv(curves, curves_path, kind="curves")
        print(f"wrote {curves_path}")
        if shutil.which("plot-profile"):
            fig_path = os.path.join(args.out, f"profile-tau{tau:g}.png")
            subprocess.run(
                ["plot-profile", "--in", curves_path, "--out", fig_path, "--tau", f"{tau:g}"],
                check=True,
            )
            print(f"wrote {fig_path}")
        else:
            print("plot-profile not installed; skipping figure", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
