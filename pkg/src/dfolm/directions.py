"""Uniform sampling of orthonormal direction frames.

A frame is an n x b matrix with orthonormal columns drawn from the
rotation-invariant (Haar) distribution. Frames are produced by QR
orthonormalisation of a standard-normal matrix with a sign fix on the
triangular factor's diagonal, which makes the map well defined and keeps
the distribution uniform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHONORMALITY_TOL = 1e-12
_MAX_RESAMPLE = 5


@dataclass(frozen=True)
class DirectionFrame:
    """Column-orthonormal sampling directions u_1, ..., u_b in R^n."""

    u: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def b(self) -> int:
        return self.u.shape[1]

    def orthonormality_defect(self) -> float:
        gram = self.u.T @ self.u
        return float(np.max(np.abs(gram - np.eye(self.b))))


@dataclass(frozen=True)
class FramePool:
    """Fixed collection of frames reused across iterations."""

    frames: tuple[DirectionFrame, ...]

    def __len__(self) -> int:
        return len(self.frames)


def sample_frame(n: int, b: int, rng: np.random.Generator) -> DirectionFrame:
    """Draw one frame uniformly from the orthonormal n x b matrices.

    Degenerate draws (rank deficient, probability zero but representable
    in floating point) are resampled; gives up after 5 attempts.
    """
    if b < 1 or b > n:
        raise ValueError(f"sampling size must satisfy 1 <= b <= n, got b={b}, n={n}")
    for _ in range(_MAX_RESAMPLE):
        gauss = rng.standard_normal((n, b))
        q, r = np.linalg.qr(gauss, mode="reduced")
        diag = np.diag(r).copy()
        signs = np.sign(diag)
        signs[signs == 0.0] = 1.0
        frame = DirectionFrame(q * signs)
        if (
            np.all(np.isfinite(frame.u))
            and np.all(diag != 0.0)
            and frame.orthonormality_defect() <= ORTHONORMALITY_TOL
        ):
            return frame
    raise RuntimeError(f"degenerate direction draw persisted after {_MAX_RESAMPLE} attempts")


def build_pool(n: int, b: int, count: int = 10, rng: np.random.Generator = None) -> FramePool:
    """Sample `count` independent frames up front."""
    if rng is None:
        raise ValueError("an explicit random generator is required")
    if count < 1:
        raise ValueError(f"pool size must be >= 1, got {count}")
    return FramePool(tuple(sample_frame(n, b, rng) for _ in range(count)))


def pick(pool: FramePool, rng: np.random.Generator) -> DirectionFrame:
    """Select a pool member uniformly at random."""
    return pool.frames[int(rng.integers(len(pool)))]
