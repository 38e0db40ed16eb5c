"""Residual test problems for derivative-free nonlinear least squares.

The catalog holds four explicit families (ex1..ex4) plus rank-deficient
modifications of classic nonlinear-equation test functions. The objective
everywhere is f(x) = 0.5 * ||r(x)||^2. Problems are immutable after
construction and safe to evaluate from multiple workers.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

Residual = Callable[[np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ResidualProblem:
    """A residual map r: R^n -> R^m with benchmark metadata.

    x0 is None for problems whose start point is drawn at random by the
    harness (10 * standard normal). f_star, when present, is the optimal
    value of 0.5 * ||r||^2; x_star a known minimiser (a root when f_star
    is zero).
    """

    name: str
    n: int
    m: int
    residual: Residual
    analytic_jacobian: Optional[Jacobian] = None
    x0: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    x_star: Optional[np.ndarray] = None

    @property
    def random_start(self) -> bool:
        return self.x0 is None

    def f(self, x: np.ndarray) -> float:
        r = self.residual(x)
        return 0.5 * float(r @ r)


def _ex1() -> ResidualProblem:
    def residual(x):
        x1, x2, x3 = x
        return np.array(
            [
                100.0 * (x1 - x2**2) ** 2 + (1.0 - x2) ** 2,
                100.0 * (x2 - x3**2) ** 2 + (1.0 - x3) ** 2,
                100.0 * (x3 - x1**2) ** 2 + (1.0 - x1) ** 2,
            ]
        )

    def jacobian(x):
        x1, x2, x3 = x
        return np.array(
            [
                [200.0 * (x1 - x2**2), -400.0 * x2 * (x1 - x2**2) - 2.0 * (1.0 - x2), 0.0],
                [0.0, 200.0 * (x2 - x3**2), -400.0 * x3 * (x2 - x3**2) - 2.0 * (1.0 - x3)],
                [-400.0 * x1 * (x3 - x1**2) - 2.0 * (1.0 - x1), 0.0, 200.0 * (x3 - x1**2)],
            ]
        )

    return ResidualProblem("ex1", 3, 3, residual, jacobian, f_star=0.0, x_star=np.ones(3))


def _ex2(n: int) -> ResidualProblem:
    def residual(x):
        r = np.empty(n)
        r[: n - 1] = 100.0 * ((x[: n - 1] ** 2 + x[n - 1] ** 2) ** 2 - 4.0 * x[: n - 1] + 3.0)
        r[n - 1] = 100.0 * x[n - 1] ** 4
        return r

    def jacobian(x):
        jac = np.zeros((n, n))
        head = x[: n - 1]
        tail = x[n - 1]
        s = head**2 + tail**2
        idx = np.arange(n - 1)
        jac[idx, idx] = 100.0 * (4.0 * head * s - 4.0)
        jac[idx, n - 1] = 400.0 * tail * s
        jac[n - 1, n - 1] = 400.0 * tail**3
        return jac

    x_star = np.ones(n)
    x_star[n - 1] = 0.0
    return ResidualProblem(f"ex2-n{n}", n, n, residual, jacobian, f_star=0.0, x_star=x_star)


def _ex3() -> ResidualProblem:
    n = 20

    def residual(x):
        r = np.empty(n)
        r[:10] = 10.0 * (x[:10] ** 2 - x[10:])
        r[10:] = x[:10] - 1.0
        return r

    def jacobian(x):
        jac = np.zeros((n, n))
        idx = np.arange(10)
        jac[idx, idx] = 20.0 * x[:10]
        jac[idx, idx + 10] = -10.0
        jac[idx + 10, idx] = 1.0
        return jac

    return ResidualProblem("ex3", n, n, residual, jacobian, f_star=0.0, x_star=np.ones(n))


# Penalty-type problem: n nearly flat linear residuals plus one quadratic
# coupling residual. The sqrt(2) factor calibrates the optimum of
# 0.5 * ||r||^2 to the tabulated reference value 7.08765e-5 at n = 10.
_PENALTY_A = 1.0e-5


def _penalty_maps(n: int) -> tuple[Residual, Jacobian]:
    c_lin = np.sqrt(2.0 * _PENALTY_A)
    c_quad = np.sqrt(2.0)

    def residual(x):
        return np.concatenate([c_lin * (x - 1.0), [c_quad * (float(x @ x) - 0.25)]])

    def jacobian(x):
        jac = np.zeros((n + 1, n))
        jac[:n, :] = c_lin * np.eye(n)
        jac[n, :] = 2.0 * c_quad * x
        return jac

    return residual, jacobian


def _penalty_symmetric_minimiser(n: int) -> np.ndarray:
    # all stationary points have equal coordinates t solving
    # 2*n*t^3 + (a - 1/2)*t - a = 0; the minimiser is the root in (0.1, 1)
    def phi(t):
        return 2.0 * n * t**3 + (_PENALTY_A - 0.5) * t - _PENALTY_A

    t = brentq(phi, 0.1, 1.0, xtol=1e-15, rtol=8.9e-16)
    for _ in range(3):  # Newton polish to full precision
        t = t - phi(t) / (6.0 * n * t**2 + _PENALTY_A - 0.5)
    return np.full(n, t)


def _ex4() -> ResidualProblem:
    n = 10
    residual, jacobian = _penalty_maps(n)
    return ResidualProblem(
        "ex4", n, n + 1, residual, jacobian,
        x0=np.arange(1.0, n + 1.0), f_star=7.08765e-5,
    )


# ---------------------------------------------------------------------------
# Nonlinear-equation bases used for the rank-deficient modifications.
# Numbers follow the classic test collection; each base carries a hand-coded
# Jacobian and a root (analytic where available, high-precision Newton
# otherwise).
# ---------------------------------------------------------------------------


def _newton_root(residual: Residual, jacobian: Jacobian, x0: np.ndarray,
                 tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    x = x0.astype(float).copy()
    for _ in range(max_iter):
        r = residual(x)
        if np.linalg.norm(r) <= tol:
            return x
        x = x - np.linalg.solve(jacobian(x), r)
    raise RuntimeError("Newton root refinement did not reach tolerance")


def _mgh1(n: int) -> ResidualProblem:
    if n != 2:
        raise ValueError("Rosenbrock system is 2-dimensional")

    def residual(x):
        return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

    def jacobian(x):
        return np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])

    return ResidualProblem(
        "mgh1", 2, 2, residual, jacobian,
        x0=np.array([-1.2, 1.0]), f_star=0.0, x_star=np.ones(2),
    )


def _mgh8(n: int) -> ResidualProblem:
    def residual(x):
        r = np.empty(n)
        r[: n - 1] = x[: n - 1] + x.sum() - (n + 1.0)
        r[n - 1] = np.prod(x) - 1.0
        return r

    def jacobian(x):
        jac = np.eye(n) + np.ones((n, n))
        # leave-one-out products via prefix/suffix scans, robust to zeros
        left = np.concatenate([[1.0], np.cumprod(x[:-1])])
        right = np.concatenate([np.cumprod(x[::-1])[::-1][1:], [1.0]])
        jac[n - 1, :] = left * right
        return jac

    return ResidualProblem(
        "mgh8", n, n, residual, jacobian,
        x0=np.full(n, 0.5), f_star=0.0, x_star=np.ones(n),
    )


def _mgh9(n: int) -> ResidualProblem:
    h = 1.0 / (n + 1)
    t = np.arange(1, n + 1) * h

    def residual(x):
        xm = np.concatenate([[0.0], x[:-1]])
        xp = np.concatenate([x[1:], [0.0]])
        return 2.0 * x - xm - xp + h**2 * (x + t + 1.0) ** 3 / 2.0

    def jacobian(x):
        jac = np.zeros((n, n))
        np.fill_diagonal(jac, 2.0 + 1.5 * h**2 * (x + t + 1.0) ** 2)
        idx = np.arange(n - 1)
        jac[idx, idx + 1] = -1.0
        jac[idx + 1, idx] = -1.0
        return jac

    x0 = t * (t - 1.0)
    x_star = _newton_root(residual, jacobian, x0)
    return ResidualProblem("mgh9", n, n, residual, jacobian, x0=x0, f_star=0.0, x_star=x_star)


def _mgh10(n: int) -> ResidualProblem:
    h = 1.0 / (n + 1)
    t = np.arange(1, n + 1) * h
    # kernel weights w[i, j] = (1 - t_i) t_j for j <= i, t_i (1 - t_j) for j > i
    w = np.where(
        np.arange(n)[None, :] <= np.arange(n)[:, None],
        np.outer(1.0 - t, t),
        np.outer(t, 1.0 - t),
    )

    def residual(x):
        y = (x + t + 1.0) ** 3
        return x + h * (w @ y) / 2.0

    def jacobian(x):
        return np.eye(n) + (3.0 * h / 2.0) * w * ((x + t + 1.0) ** 2)[None, :]

    x0 = t * (t - 1.0)
    x_star = _newton_root(residual, jacobian, x0)
    return ResidualProblem("mgh10", n, n, residual, jacobian, x0=x0, f_star=0.0, x_star=x_star)


def _mgh11(n: int) -> ResidualProblem:
    idx = np.arange(1, n + 1)

    def residual(x):
        return n - np.cos(x).sum() + idx * (1.0 - np.cos(x)) - np.sin(x)

    def jacobian(x):
        jac = np.tile(np.sin(x), (n, 1))
        jac[np.arange(n), np.arange(n)] = (1.0 + idx) * np.sin(x) - np.cos(x)
        return jac

    return ResidualProblem(
        "mgh11", n, n, residual, jacobian,
        x0=np.full(n, 1.0 / n), f_star=0.0, x_star=np.zeros(n),
    )


def _mgh12(n: int) -> ResidualProblem:
    j = np.arange(1.0, n + 1.0)

    def residual(x):
        s = float(j @ (x - 1.0))
        return np.concatenate([x - 1.0, [s, s * s]])

    def jacobian(x):
        s = float(j @ (x - 1.0))
        return np.vstack([np.eye(n), j, 2.0 * s * j])

    return ResidualProblem(
        "mgh12", n, n + 2, residual, jacobian,
        x0=1.0 - j / n, f_star=0.0, x_star=np.ones(n),
    )


def _mgh13(n: int) -> ResidualProblem:
    def residual(x):
        xm = np.concatenate([[0.0], x[:-1]])
        xp = np.concatenate([x[1:], [0.0]])
        return (3.0 - 2.0 * x) * x - xm - 2.0 * xp + 1.0

    def jacobian(x):
        jac = np.zeros((n, n))
        np.fill_diagonal(jac, 3.0 - 4.0 * x)
        idx = np.arange(n - 1)
        jac[idx + 1, idx] = -1.0
        jac[idx, idx + 1] = -2.0
        return jac

    x0 = np.full(n, -1.0)
    x_star = _newton_root(residual, jacobian, x0)
    return ResidualProblem("mgh13", n, n, residual, jacobian, x0=x0, f_star=0.0, x_star=x_star)


def _mgh14(n: int) -> ResidualProblem:
    lower, upper = 5, 1  # band: j != i, i - 5 <= j <= i + 1

    def residual(x):
        y = x * (1.0 + x)
        c = np.concatenate([[0.0], np.cumsum(y)])
        r = np.empty(n)
        for i in range(n):
            lo = max(0, i - lower)
            hi = min(n - 1, i + upper)
            band = c[hi + 1] - c[lo] - y[i]
            r[i] = x[i] * (2.0 + 5.0 * x[i] ** 2) + 1.0 - band
        return r

    def jacobian(x):
        jac = np.zeros((n, n))
        np.fill_diagonal(jac, 2.0 + 15.0 * x**2)
        for off in range(-lower, upper + 1):
            if off == 0:
                continue
            idx = np.arange(max(0, -off), min(n, n - off))
            jac[idx, idx + off] = -(1.0 + 2.0 * x[idx + off])
        return jac

    x0 = np.full(n, -1.0)
    x_star = _newton_root(residual, jacobian, x0)
    return ResidualProblem("mgh14", n, n, residual, jacobian, x0=x0, f_star=0.0, x_star=x_star)


def _mgh23(n: int) -> ResidualProblem:
    residual, jacobian = _penalty_maps(n)
    x_star = _penalty_symmetric_minimiser(n)
    r_star = residual(x_star)
    return ResidualProblem(
        "mgh23", n, n + 1, residual, jacobian,
        x0=np.arange(1.0, n + 1.0),
        f_star=0.5 * float(r_star @ r_star),
        x_star=x_star,
    )


_MGH_BUILDERS: dict[int, Callable[[int], ResidualProblem]] = {
    1: _mgh1, 8: _mgh8, 9: _mgh9, 10: _mgh10, 11: _mgh11,
    12: _mgh12, 13: _mgh13, 14: _mgh14, 23: _mgh23,
}


def mgh_base(number: int, n: int) -> ResidualProblem:
    """Nonlinear-equation base problem by collection number."""
    if number not in _MGH_BUILDERS:
        raise ValueError(f"unsupported problem number {number}")
    return _MGH_BUILDERS[number](n)


def apply_singular_modification(
    base: ResidualProblem,
    x_star: Optional[np.ndarray] = None,
    a_matrix: Optional[np.ndarray] = None,
) -> ResidualProblem:
    """Make the Jacobian rank deficient at a designated solution.

    Subtracts the affine correction J(x*) A (A^T A)^{-1} A^T (x - x*) from
    the residual, so the modified Jacobian annihilates range(A) at x*. The
    correction matrix is computed once. x* must be a root or a stationary
    point of the base problem; A defaults to a single all-ones column.
    """
    if base.analytic_jacobian is None:
        raise ValueError("base problem lacks an analytic jacobian")
    if x_star is None:
        x_star = base.x_star
    if x_star is None:
        raise ValueError("base problem has no designated solution point")
    x_star = np.asarray(x_star, dtype=float)
    if a_matrix is None:
        a_matrix = np.ones((base.n, 1))
    a_matrix = np.asarray(a_matrix, dtype=float)
    if a_matrix.ndim != 2 or a_matrix.shape[0] != base.n:
        raise ValueError(f"A must be {base.n} x k, got shape {a_matrix.shape}")
    if np.linalg.svd(a_matrix, compute_uv=False)[-1] <= 1e-10:
        raise ValueError("singular projection")

    projector = a_matrix @ np.linalg.solve(a_matrix.T @ a_matrix, a_matrix.T)
    correction = base.analytic_jacobian(x_star) @ projector
    base_residual = base.residual
    base_jacobian = base.analytic_jacobian

    def residual(x):
        return base_residual(x) - correction @ (x - x_star)

    def jacobian(x):
        return base_jacobian(x) - correction

    r_star = residual(x_star)
    return replace(
        base,
        name=f"{base.name}-mod-n{base.n}",
        residual=residual,
        analytic_jacobian=jacobian,
        f_star=0.5 * float(r_star @ r_star),
        x_star=x_star,
    )


_MODIFIED_DIMS = {1: 2, 8: 50, 9: 50, 10: 50, 11: 50, 12: 50, 13: 50, 14: 50, 23: 10}


@lru_cache(maxsize=None)
def _build(pid: str) -> ResidualProblem:
    if pid == "ex1":
        return _ex1()
    if pid == "ex2-n30":
        return _ex2(30)
    if pid == "ex2-n50":
        return _ex2(50)
    if pid == "ex3":
        return _ex3()
    if pid == "ex4":
        return _ex4()
    for number, dim in _MODIFIED_DIMS.items():
        if pid == f"mgh{number}-mod-n{dim}":
            return apply_singular_modification(mgh_base(number, dim))
    raise ValueError(f"unknown problem id: {pid}")


SUITE_IDS: tuple[str, ...] = (
    "ex1",
    "ex2-n30",
    "ex2-n50",
    "ex3",
    "ex4",
    *(f"mgh{num}-mod-n{dim}" for num, dim in _MODIFIED_DIMS.items()),
)


def get_problem(pid: str) -> ResidualProblem:
    """Resolve a catalog problem by string id."""
    return _build(pid)


def make_suite() -> list[ResidualProblem]:
    """The full benchmark catalog in canonical order."""
    return [_build(pid) for pid in SUITE_IDS]
