"""Render solver performance-profile curves from a curves CSV.

Input layout: header ``solver_id,alpha,pi`` with one row per breakpoint,
grouped by solver, alphas ascending within a solver. Curves are drawn as
right-continuous steps of pi against log2(alpha): each breakpoint's value
holds until the next one. All math lives upstream; this module only draws.
"""
from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_HEADER = ("solver_id", "alpha", "pi")


def parse_curves(path: str) -> dict[str, list[tuple[float, float]]]:
    """Breakpoint lists per solver, validated against the documented layout."""
    curves: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: missing header") from None
        if header != EXPECTED_HEADER:
            raise ValueError(f"{path}: expected header {','.join(EXPECTED_HEADER)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            solver, alpha_text, pi_text = row
            try:
                alpha = float(alpha_text)
                pi = float(pi_text)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric breakpoint {row}") from None
            if alpha < 1.0 or not 0.0 <= pi <= 1.0:
                raise ValueError(f"{path}:{lineno}: breakpoint out of range {row}")
            curves.setdefault(solver, []).append((alpha, pi))
    if not curves:
        raise ValueError(f"{path}: no curves in input")
    for solver, points in curves.items():
        alphas = [a for a, _ in points]
        if alphas != sorted(alphas):
            raise ValueError(f"{path}: alphas for {solver} are not ascending")
    return curves


def build_figure(curves: dict[str, list[tuple[float, float]]], tau_label: str) -> plt.Figure:
    """One labelled right-continuous step per solver on a log2(alpha) axis.

    Each line's data points are exactly the CSV breakpoints (x = log2 alpha),
    plus one terminal hold point where a curve ends before the right edge.
    """
    axis_max = max(1.0, max(math.log2(points[-1][0]) for points in curves.values()))
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for solver in sorted(curves):
        points = curves[solver]
        xs = [math.log2(alpha) for alpha, _ in points]
        ys = [pi for _, pi in points]
        if xs[-1] < axis_max:
            xs.append(axis_max)
            ys.append(ys[-1])
        ax.step(xs, ys, where="post", label=solver)
    ax.set_xlim(0.0, axis_max)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel(r"$\log_2(\alpha)$")
    ax.set_ylabel(r"$\pi(\alpha)$")
    ax.set_title(f"Performance profile (tau = {tau_label})")
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    return fig


def render_profile(in_path: str, out_path: str, tau_label: str) -> None:
    """Read a curves CSV and write the figure."""
    curves = parse_curves(in_path)
    fig = build_figure(curves, tau_label)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
