"""Derivative-free Levenberg-Marquardt iteration.

Each iteration estimates the Jacobian from residual samples, solves the
damped normal equations (Jm^T Jm + lambda I) d = -Jm^T r with
lambda = theta * ||Jm^T r||, and accepts the step when the ratio of the
achieved to the model-predicted decrease of ||r||^2 reaches p0. The
damping weight theta follows a three-way update driven by the
gradient-model magnitude, and the smoothing step gamma is the norm of the
most recent solved step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import scipy.linalg

from .directions import build_pool, pick, sample_frame
from .jacobian import estimate_fd, estimate_oss, gradient_model, OverflowSignal
from .problems import ResidualProblem

Method = Literal["fd", "ossv1", "ossv2"]

GRADIENT_SMALL = "GradientSmall"
MAX_ITER = "MaxIter"
OVERFLOW = "Overflow"

TRACE_COLUMNS = (
    "k", "theta", "lambda", "rho", "norm_r", "norm_grad_model",
    "norm_d", "gamma", "accepted", "nf_cumulative",
)


class NumericalBreakdown(RuntimeError):
    """Predicted reduction was not positive despite a nonzero gradient model."""


@dataclass(frozen=True)
class SolverConfig:
    """Tunables of the iteration. Defaults are the standard benchmark values."""

    p0: float = 1e-3
    p1: float = 0.25
    p2: float = 0.75
    a1: float = 4.0
    a2: float = 0.25
    theta0: float = 1e-8
    theta_min: float = 1e-8
    eps0: float = 1e-4
    b: Optional[int] = None          # sampling size, defaults to n
    gamma0: Optional[float] = None   # initial smoothing step, defaults to 1e-2 * max(1, ||x0||_inf)
    gamma_floor: float = 1e-12
    max_iter: Optional[int] = None   # defaults to 1000 * (n + 1)
    method: Method = "ossv1"
    pool_size: int = 10
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.p0 < 1.0 and self.p0 < self.p1 < self.p2):
            raise ValueError("need 0 < p0 < 1 and p0 < p1 < p2")
        # the default pair (4, 0.25) sits exactly on the a1 * a2 = 1 boundary
        if not (self.a1 > 1.0 > self.a2 > 0.0 and self.a1 * self.a2 <= 1.0):
            raise ValueError("need a1 > 1 > a2 > 0 with a1 * a2 <= 1")
        if not (self.theta0 >= self.theta_min > 0.0):
            raise ValueError("need theta0 >= theta_min > 0")
        if self.eps0 < 0.0:
            raise ValueError("eps0 must be nonnegative")
        if self.gamma0 is not None and self.gamma0 <= 0.0:
            raise ValueError("gamma0 must be positive")
        if self.gamma_floor <= 0.0:
            raise ValueError("gamma_floor must be positive")
        if self.method not in ("fd", "ossv1", "ossv2"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")

    def resolved_b(self, n: int) -> int:
        b = n if self.b is None else self.b
        if not 1 <= b <= n:
            raise ValueError(f"sampling size must satisfy 1 <= b <= n, got b={b}, n={n}")
        return b

    def resolved_gamma0(self, x0: np.ndarray) -> float:
        if self.gamma0 is not None:
            return self.gamma0
        return 1e-2 * max(1.0, float(np.max(np.abs(x0))))

    def resolved_max_iter(self, n: int) -> int:
        return 1000 * (n + 1) if self.max_iter is None else self.max_iter


@dataclass(frozen=True)
class IterationRecord:
    k: int
    theta: float
    lam: float
    rho: Optional[float]   # None when the step broke down and was skipped
    norm_r: float
    norm_grad_model: float
    norm_d: float
    gamma: float
    accepted: bool
    nf_cumulative: int


@dataclass
class SolveResult:
    x_final: np.ndarray
    f_final: float
    norm_grad_model_final: float
    status: str
    niter: int
    nf: int
    trace: list[IterationRecord]
    points: Optional[list[np.ndarray]] = None   # x_k at the start of pass k, when requested
    invariant_violations: list[str] = field(default_factory=list)


STEP_RESIDUAL_RTOL = 1e-10


def normal_equations_residual(a: np.ndarray, d: np.ndarray, g: np.ndarray) -> np.ndarray:
    """a @ d + g accumulated in extended precision.

    A double-precision product rounds at eps * ||a|| * ||d||, which can
    dwarf a small true residual on ill-conditioned systems; the extended
    accumulation keeps the measurement (and refinement) meaningful.
    """
    acc = np.longdouble(a) @ np.longdouble(d) + np.longdouble(g)
    return acc.astype(float)


def solve_lm_step(jm: np.ndarray, r_x: np.ndarray, theta: float) -> tuple[np.ndarray, float]:
    """Solve (Jm^T Jm + lambda I) d = -Jm^T r with lambda = theta * ||Jm^T r||.

    Uses a symmetric positive-definite factorisation, falling back to an
    orthogonal factorisation of the stacked system [Jm; sqrt(lambda) I]
    when rounding makes the normal matrix numerically indefinite. Iterative
    refinement with extended-precision residuals keeps
    ||(Jm^T Jm + lambda I) d + Jm^T r|| below 1e-10 * (1 + ||Jm^T r||).
    """
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    if not (np.all(np.isfinite(jm)) and np.all(np.isfinite(r_x))):
        raise OverflowSignal("non-finite inputs to the step solve")
    g = gradient_model(jm, r_x)
    norm_g = float(np.linalg.norm(g))
    if norm_g == 0.0:
        return np.zeros(jm.shape[1]), 0.0
    lam = theta * norm_g
    if not math.isfinite(lam):
        raise OverflowSignal("non-finite damping weight")
    n = jm.shape[1]
    with np.errstate(over="ignore", invalid="ignore"):
        a = jm.T @ jm + lam * np.eye(n)

    correct = None
    if np.all(np.isfinite(a)):
        try:
            factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
            correct = lambda rhs: scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        except scipy.linalg.LinAlgError:
            correct = None
    if correct is None:
        # stacked form avoids squaring jm, so it also covers normal
        # matrices that overflowed; K^T K = a maps the correction rhs v
        # to the stacked right-hand side [0; v / sqrt(lambda)]
        stacked = np.vstack([jm, math.sqrt(lam) * np.eye(n)])
        zeros_m = np.zeros(jm.shape[0])

        def correct(rhs):
            stacked_rhs = np.concatenate([zeros_m, rhs / math.sqrt(lam)])
            return scipy.linalg.lstsq(stacked, stacked_rhs, check_finite=False)[0]

        d = scipy.linalg.lstsq(
            stacked, np.concatenate([-r_x, np.zeros(n)]), check_finite=False
        )[0]
    else:
        d = correct(-g)

    if np.all(np.isfinite(a)):
        tol = 0.25 * STEP_RESIDUAL_RTOL * (1.0 + norm_g)
        for _ in range(3):
            residual = normal_equations_residual(a, d, g)
            if float(np.linalg.norm(residual)) <= tol:
                break
            update = correct(-residual)
            if not np.all(np.isfinite(update)):
                break
            d = d + update

    if not np.all(np.isfinite(d)):
        raise OverflowSignal("non-finite step from the linear solve")
    return d, lam


def predicted_reduction(r_x: np.ndarray, jm: np.ndarray, d: np.ndarray) -> float:
    """Model decrease ||r||^2 - ||r + Jm d||^2."""
    model = r_x + jm @ d
    return float(r_x @ r_x) - float(model @ model)


def reduction_ratio(r_x: np.ndarray, r_trial: np.ndarray, jm: np.ndarray, d: np.ndarray) -> float:
    """Achieved over predicted decrease of ||r||^2.

    Non-finite trial residuals yield -inf, which callers treat as a
    rejection. A nonpositive predicted decrease raises NumericalBreakdown;
    callers reject the step and inflate theta.
    """
    pred = predicted_reduction(r_x, jm, d)
    if pred <= 0.0:
        raise NumericalBreakdown(f"predicted reduction {pred} is not positive")
    if not np.all(np.isfinite(r_trial)):
        return -math.inf
    ared = float(r_x @ r_x) - float(r_trial @ r_trial)
    return ared / pred


def update_theta(theta: float, rho: Optional[float], norm_grad_model: float, cfg: SolverConfig) -> float:
    """Three-way damping update.

    Rejected or broken-down steps (rho below p0, non-finite, or undefined)
    inflate theta by a1. Otherwise theta grows while theta * ||g|| < p1,
    holds on [p1, p2), and shrinks (floored at theta_min) beyond.
    """
    if rho is None or not math.isfinite(rho) or rho < cfg.p0:
        return cfg.a1 * theta
    if norm_grad_model < cfg.p1 / theta:
        return cfg.a1 * theta
    if norm_grad_model < cfg.p2 / theta:
        return theta
    return max(cfg.a2 * theta, cfg.theta_min)


def _check_iteration(
    viol: list[str], k: int, cfg: SolverConfig, jm: np.ndarray, g: np.ndarray,
    norm_g: float, lam: float, theta: float, d: np.ndarray, norm_d: float,
    pred: float, new_theta: float,
) -> None:
    # lambda relation
    if abs(lam - theta * norm_g) > 1e-12 * max(lam, theta * norm_g):
        viol.append(f"k={k}: lambda {lam} != theta*||g|| {theta * norm_g}")
    # step-norm bound ||d|| <= 1/theta
    if norm_d > (1.0 / theta) * (1.0 + 1e-10):
        viol.append(f"k={k}: ||d|| {norm_d} exceeds 1/theta {1.0 / theta}")
    # normal-equations residual, measured in extended precision; rounding
    # the step vector itself already costs eps * ||A|| * ||d||, so that
    # representation floor is allowed on top of the contract tolerance
    jtj = jm.T @ jm
    spectral = float(np.linalg.norm(jtj, 2))
    res = np.linalg.norm(normal_equations_residual(jtj + lam * np.eye(jm.shape[1]), d, g))
    allowance = np.finfo(float).eps * (spectral + lam) * norm_d
    if res > STEP_RESIDUAL_RTOL * (1.0 + norm_g) + allowance:
        viol.append(f"k={k}: step-solve residual {res} too large")
    # predicted-reduction lower bound
    if norm_g > 0.0:
        floor = norm_g * min(norm_d, norm_g / spectral) if spectral > 0.0 else 0.0
        if pred + 1e-8 * (abs(pred) + floor) < floor:
            viol.append(f"k={k}: predicted reduction {pred} below bound {floor}")
    # theta-update membership and growth cap
    allowed = (cfg.a1 * theta, theta, max(cfg.a2 * theta, cfg.theta_min))
    if new_theta not in allowed:
        viol.append(f"k={k}: theta update {new_theta} outside {allowed}")
    if new_theta > cfg.a1 * theta:
        viol.append(f"k={k}: theta grew faster than a1")


def run_solver(
    problem: ResidualProblem,
    cfg: SolverConfig,
    rng: Optional[np.random.Generator] = None,
    x0: Optional[np.ndarray] = None,
    keep_points: bool = False,
    check_invariants: bool = False,
) -> SolveResult:
    """Run the iteration on one problem from one start point.

    The RNG defaults to a fresh generator seeded with cfg.seed; passing one
    in lets a harness share the stream that drew the start point. Every
    residual evaluation (centre, perturbations, trial points) counts one
    unit of nf.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if x0 is None:
        x0 = problem.x0
    if x0 is None:
        raise ValueError(f"problem {problem.name} has a random start; supply x0")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (problem.n,):
        raise ValueError(f"start point has shape {x.shape}, expected ({problem.n},)")

    n = problem.n
    b = cfg.resolved_b(n)
    gamma = cfg.resolved_gamma0(x)
    max_iter = cfg.resolved_max_iter(n)
    theta = cfg.theta0

    pool = None
    if cfg.method == "ossv2":
        pool = build_pool(n, b, cfg.pool_size, rng)

    trace: list[IterationRecord] = []
    points: list[np.ndarray] = [] if keep_points else None
    violations: list[str] = []

    r = problem.residual(x)
    nf = 1
    if r.shape != (problem.m,):
        raise ValueError(f"residual returned shape {r.shape}, expected ({problem.m},)")
    if not np.all(np.isfinite(r)):
        return SolveResult(x, math.inf, math.nan, OVERFLOW, 0, nf, trace, points, violations)

    status = MAX_ITER
    norm_g = math.nan

    for k in range(max_iter):
        if keep_points:
            points.append(x.copy())
        try:
            if cfg.method == "fd":
                est = estimate_fd(problem, x, r, gamma)
            elif cfg.method == "ossv1":
                est = estimate_oss(problem, x, r, sample_frame(n, b, rng), gamma)
            else:
                est = estimate_oss(problem, x, r, pick(pool, rng), gamma)
        except OverflowSignal as exc:
            nf += exc.evals_consumed
            status = OVERFLOW
            break
        nf += est.nf_cost

        g = gradient_model(est.jm, r)
        norm_g = float(np.linalg.norm(g))
        if norm_g <= cfg.eps0:
            status = GRADIENT_SMALL
            break

        try:
            d, lam = solve_lm_step(est.jm, r, theta)
        except OverflowSignal:
            status = OVERFLOW
            break
        norm_d = float(np.linalg.norm(d))

        x_trial = x + d
        if not np.all(np.isfinite(x_trial)):
            status = OVERFLOW
            break
        r_trial = problem.residual(x_trial)
        nf += 1

        rho: Optional[float]
        try:
            rho = reduction_ratio(r, r_trial, est.jm, d)
        except NumericalBreakdown:
            rho = None
        accepted = rho is not None and rho >= cfg.p0

        norm_r = float(np.linalg.norm(r))
        trace.append(
            IterationRecord(
                k=k, theta=theta, lam=lam, rho=rho, norm_r=norm_r,
                norm_grad_model=norm_g, norm_d=norm_d, gamma=gamma,
                accepted=accepted, nf_cumulative=nf,
            )
        )

        new_theta = update_theta(theta, rho, norm_g, cfg)
        if check_invariants:
            _check_iteration(
                violations, k, cfg, est.jm, g, norm_g, lam, theta, d, norm_d,
                predicted_reduction(r, est.jm, d), new_theta,
            )
            if accepted and float(r_trial @ r_trial) > float(r @ r):
                violations.append(f"k={k}: accepted step increased ||r||")

        if accepted:
            x = x_trial
            r = r_trial
        theta = new_theta
        gamma = max(norm_d, cfg.gamma_floor)

    f_final = 0.5 * float(r @ r)
    return SolveResult(
        x_final=x, f_final=f_final, norm_grad_model_final=norm_g,
        status=status, niter=len(trace), nf=nf, trace=trace,
        points=points, invariant_violations=violations,
    )


def trace_to_csv(trace: list[IterationRecord], path: str) -> None:
    """One row per iteration, columns in TRACE_COLUMNS order."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for rec in trace:
            writer.writerow(
                [
                    rec.k, repr(rec.theta), repr(rec.lam),
                    "" if rec.rho is None else repr(rec.rho),
                    repr(rec.norm_r), repr(rec.norm_grad_model), repr(rec.norm_d),
                    repr(rec.gamma), str(rec.accepted).lower(), rec.nf_cumulative,
                ]
            )
