"""Statistical probes for the sampling-based gradient model.

Probe problems restrict to affine or quadratic residuals so that every
constant entering the bias, variance, and accuracy bounds (per-residual
gradient Lipschitz constants) is exact: the Hessian of each residual is
constant and its spectral norm is computed directly, never estimated.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .directions import sample_frame
from .jacobian import estimate_oss, gradient_model
from .problems import ResidualProblem
from .solver import SolveResult


@dataclass(frozen=True)
class ProbeProblem:
    """Residual problem with constant per-residual Hessians.

    kappas[i] is the spectral norm of the Hessian of residual i, so the
    per-residual gradient maps are Lipschitz with exactly these constants.
    """

    problem: ResidualProblem
    hessians: tuple[np.ndarray, ...]
    kappas: np.ndarray
    kappa_max: float

    def grad_f(self, x: np.ndarray) -> np.ndarray:
        return self.problem.analytic_jacobian(x).T @ self.problem.residual(x)


@dataclass
class AccuracyReport:
    """Observed statistics next to their analytic bounds."""

    samples: int
    bias_observed: Optional[float] = None
    bias_bound: Optional[float] = None
    bias_stderr: Optional[float] = None
    variance_observed: Optional[float] = None
    variance_bound: Optional[float] = None
    variance_rel_stderr: Optional[float] = None
    event_rate: Optional[float] = None
    event_stderr: Optional[float] = None
    alpha_target: Optional[float] = None
    xi1: Optional[float] = None
    xi2: Optional[float] = None

    def to_json(self) -> str:
        data = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(data, indent=2, sort_keys=True)


def _quadratic_problem(
    name: str, n: int, m: int, hessians: Sequence[np.ndarray],
    slopes: np.ndarray, offsets: np.ndarray,
) -> ResidualProblem:
    hessians = tuple(np.asarray(q, dtype=float) for q in hessians)

    def residual(x):
        return np.array(
            [0.5 * float(x @ (q @ x)) + float(a @ x) + c
             for q, a, c in zip(hessians, slopes, offsets)]
        )

    def jacobian(x):
        return np.vstack([q @ x + a for q, a in zip(hessians, slopes)])

    return ResidualProblem(name, n, m, residual, jacobian)


def quadratic_probe(n: int, m: int, seed: int = 0, scale: float = 1.0) -> ProbeProblem:
    """Seeded random quadratic residuals r_i = 0.5 x^T Q_i x + a_i^T x + c_i."""
    rng = np.random.default_rng(seed)
    hessians = []
    for _ in range(m):
        raw = rng.standard_normal((n, n))
        hessians.append(scale * (raw + raw.T) / 2.0)
    slopes = rng.standard_normal((m, n))
    offsets = rng.standard_normal(m)
    problem = _quadratic_problem(f"quad-probe-n{n}m{m}", n, m, hessians, slopes, offsets)
    kappas = np.array([float(np.max(np.abs(np.linalg.eigvalsh(q)))) for q in hessians])
    return ProbeProblem(problem, tuple(hessians), kappas, float(np.max(kappas)))


def affine_probe(n: int, m: int, seed: int = 0) -> ProbeProblem:
    """Seeded random affine residuals; all Lipschitz constants are zero."""
    rng = np.random.default_rng(seed)
    slopes = rng.standard_normal((m, n))
    offsets = rng.standard_normal(m)
    zeros = tuple(np.zeros((n, n)) for _ in range(m))
    problem = _quadratic_problem(f"affine-probe-n{n}m{m}", n, m, zeros, slopes, offsets)
    return ProbeProblem(problem, zeros, np.zeros(m), 0.0)


def sample_gradient_models(
    probe: ProbeProblem, x: np.ndarray, gamma: float, b: int,
    n_samples: int, rng: np.random.Generator,
) -> np.ndarray:
    """Gradient models from n_samples independent frames, one row each."""
    problem = probe.problem
    r_x = problem.residual(x)
    out = np.empty((n_samples, problem.n))
    for s in range(n_samples):
        frame = sample_frame(problem.n, b, rng)
        est = estimate_oss(problem, x, r_x, frame, gamma)
        out[s] = gradient_model(est.jm, r_x)
    return out


def bias_bound(probe: ProbeProblem, x: np.ndarray, gamma: float) -> float:
    """sqrt(m) n kappa_max gamma / (n + 1) * ||r(x)||."""
    problem = probe.problem
    norm_r = float(np.linalg.norm(problem.residual(x)))
    return math.sqrt(problem.m) * problem.n * probe.kappa_max * gamma / (problem.n + 1) * norm_r


def variance_bound(probe: ProbeProblem, x: np.ndarray, gamma: float, b: int) -> float:
    """(n/b - 1)||g||^2 + (n/b - 1) sqrt(m) n k g_r ||g|| + m n^2 k^2 gamma^2 / (4b) ||r||^2."""
    problem = probe.problem
    n, m, k = problem.n, problem.m, probe.kappa_max
    norm_r = float(np.linalg.norm(problem.residual(x)))
    norm_g = float(np.linalg.norm(probe.grad_f(x)))
    over = n / b - 1.0
    return (
        over * norm_g**2
        + over * math.sqrt(m) * n * k * gamma * norm_r * norm_g
        + m * n**2 * k**2 * gamma**2 / (4.0 * b) * norm_r**2
    )


def probe_bias(
    probe: ProbeProblem, x: np.ndarray, gamma: float, b: int,
    n_samples: int, rng: np.random.Generator,
) -> AccuracyReport:
    """Distance from the Monte-Carlo mean gradient model to the true gradient."""
    grads = sample_gradient_models(probe, x, gamma, b, n_samples, rng)
    mean = grads.mean(axis=0)
    observed = float(np.linalg.norm(mean - probe.grad_f(x)))
    spread = np.sum((grads - mean) ** 2, axis=1)
    stderr = math.sqrt(float(spread.sum()) / (n_samples - 1) / n_samples)
    return AccuracyReport(
        samples=n_samples,
        bias_observed=observed,
        bias_bound=bias_bound(probe, x, gamma),
        bias_stderr=stderr,
    )


def probe_variance(
    probe: ProbeProblem, x: np.ndarray, gamma: float, b: int,
    n_samples: int, rng: np.random.Generator,
) -> AccuracyReport:
    """Second central moment of the gradient model against its analytic bound."""
    grads = sample_gradient_models(probe, x, gamma, b, n_samples, rng)
    mean = grads.mean(axis=0)
    squared = np.sum((grads - mean) ** 2, axis=1)
    observed = float(squared.mean())
    rel_stderr = float(squared.std(ddof=1)) / math.sqrt(n_samples) / observed if observed > 0 else 0.0
    return AccuracyReport(
        samples=n_samples,
        variance_observed=observed,
        variance_bound=variance_bound(probe, x, gamma, b),
        variance_rel_stderr=rel_stderr,
    )


def min_sampling_size(n: int, alpha: float, eta: float, p0: float) -> int:
    """Smallest b making the gradient models accurate with probability alpha.

    b must reach both n / (D + 1) with
    D = eta^2 (1-p0)^2 (1-alpha) / (2 + eta (1-p0))^2 and n / 2.
    """
    if not (0.0 < alpha < 1.0 and 0.0 < eta < 1.0 and 0.0 < p0 < 1.0):
        raise ValueError("alpha, eta, p0 must lie in (0, 1)")
    d = eta**2 * (1.0 - p0) ** 2 * (1.0 - alpha) / (2.0 + eta * (1.0 - p0)) ** 2
    b_accuracy = math.ceil(n / (d + 1.0) * (1.0 - 1e-12))
    return max(b_accuracy, (n + 1) // 2, 1)


def accuracy_constants(
    probe: ProbeProblem, n: int, b: int, alpha: float, norm_r0: float
) -> tuple[float, float]:
    """(xi1, xi2) for the accuracy event at sampling size b."""
    xi1 = math.sqrt(max(n / b - 1.0, 0.0) / (1.0 - alpha))
    xi2 = (
        math.sqrt(probe.problem.m)
        * probe.kappa_max
        * (n / (2.0 * math.sqrt(1.0 - alpha)) + 1.0)
        * norm_r0
    )
    return xi1, xi2


def probe_event_rate(
    probe: ProbeProblem,
    result: SolveResult,
    alpha: float,
    eta: float,
    p0: float,
    rng: np.random.Generator,
    trials: int = 2000,
    b: Optional[int] = None,
) -> AccuracyReport:
    """Frequency of the gradient-accuracy event along a recorded trajectory.

    For each trial, one trajectory point x_k (k >= 1, round-robin) gets a
    fresh frame at gamma_k = ||d_{k-1}||; the event holds when
    ||grad_model - grad f(x_k)|| <= xi1 ||grad f(x_k)|| + xi2 ||d_{k-1}||,
    up to a 1e-12 relative roundoff allowance (the left side never reaches
    exact zero in floating point even when the estimator is exact). The
    trajectory must have been recorded with keep_points=True.
    """
    if result.points is None or len(result.points) < 2:
        raise ValueError("need a recorded trajectory with at least one completed step")
    problem = probe.problem
    n = problem.n
    if b is None:
        b = min_sampling_size(n, alpha, eta, p0)
    norm_r0 = float(np.linalg.norm(problem.residual(result.points[0])))
    xi1, xi2 = accuracy_constants(probe, n, b, alpha, norm_r0)

    usable = []
    for k in range(1, len(result.points)):
        d_prev = result.trace[k - 1].norm_d
        if d_prev > 0.0:
            usable.append((result.points[k], d_prev))
    if not usable:
        raise ValueError("trajectory has no usable steps")

    hits = 0
    for t in range(trials):
        x_k, d_prev = usable[t % len(usable)]
        r_k = problem.residual(x_k)
        frame = sample_frame(n, b, rng)
        est = estimate_oss(problem, x_k, r_k, frame, d_prev)
        grad = gradient_model(est.jm, r_k)
        true = probe.grad_f(x_k)
        norm_true = float(np.linalg.norm(true))
        allowance = 1e-12 * (1.0 + norm_true)
        if np.linalg.norm(grad - true) <= xi1 * norm_true + xi2 * d_prev + allowance:
            hits += 1
    rate = hits / trials
    stderr = math.sqrt(max(rate * (1.0 - rate), 1e-12) / trials)
    return AccuracyReport(
        samples=trials, event_rate=rate, event_stderr=stderr,
        alpha_target=alpha, xi1=xi1, xi2=xi2,
    )
