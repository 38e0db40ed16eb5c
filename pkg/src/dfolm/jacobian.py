"""Jacobian estimation from residual samples.

Two estimators: forward differences along orthonormal random directions
(one frame per estimate) and coordinate forward differences. Both consume
a caller-supplied centre value r(x), so the evaluation count per estimate
is exactly b (directions) or n (coordinates).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .directions import DirectionFrame
from .problems import ResidualProblem

OSS = "oss"
FD = "fd"


class OverflowSignal(RuntimeError):
    """A residual evaluation produced non-finite values."""

    def __init__(self, message: str, evals_consumed: int = 0):
        super().__init__(message)
        self.evals_consumed = evals_consumed


@dataclass(frozen=True)
class JacobianEstimate:
    jm: np.ndarray
    nf_cost: int
    gamma: float
    method: str


def estimate_oss(
    problem: ResidualProblem,
    x: np.ndarray,
    r_x: np.ndarray,
    frame: DirectionFrame,
    gamma: float,
) -> JacobianEstimate:
    """Estimate the Jacobian along the frame's directions.

    Row i of the estimate is (n/b) * sum_j ((r_i(x + gamma u_j) - r_i(x)) / gamma) u_j^T,
    assembled in one pass as (n / (b gamma)) * DR @ U^T with DR the m x b
    matrix of residual differences. Exact for affine residuals when b = n.
    """
    if gamma <= 0.0:
        raise ValueError(f"smoothing step must be positive, got {gamma}")
    if frame.n != problem.n:
        raise ValueError(f"frame dimension {frame.n} does not match problem dimension {problem.n}")
    u = frame.u
    deltas = np.empty((problem.m, frame.b))
    for j in range(frame.b):
        r_j = problem.residual(x + gamma * u[:, j])
        if not np.all(np.isfinite(r_j)):
            raise OverflowSignal("non-finite residual at perturbed point", evals_consumed=j + 1)
        deltas[:, j] = r_j - r_x
    jm = (problem.n / (frame.b * gamma)) * (deltas @ u.T)
    return JacobianEstimate(jm=jm, nf_cost=frame.b, gamma=gamma, method=OSS)


def estimate_fd(
    problem: ResidualProblem,
    x: np.ndarray,
    r_x: np.ndarray,
    gamma: float,
) -> JacobianEstimate:
    """Coordinate forward-difference Jacobian, column j = (r(x + gamma e_j) - r(x)) / gamma."""
    if gamma <= 0.0:
        raise ValueError(f"smoothing step must be positive, got {gamma}")
    jm = np.empty((problem.m, problem.n))
    for j in range(problem.n):
        step = x.copy()
        step[j] += gamma
        r_j = problem.residual(step)
        if not np.all(np.isfinite(r_j)):
            raise OverflowSignal("non-finite residual at perturbed point", evals_consumed=j + 1)
        jm[:, j] = (r_j - r_x) / gamma
    return JacobianEstimate(jm=jm, nf_cost=problem.n, gamma=gamma, method=FD)


def gradient_model(jm: np.ndarray, r_x: np.ndarray) -> np.ndarray:
    """Model gradient of 0.5 * ||r||^2, namely Jm^T r."""
    return jm.T @ r_x
