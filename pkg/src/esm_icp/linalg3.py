"""3x3 singular value decomposition and the orthogonal Procrustes fit.

Only the 3x3 cross-covariance is ever decomposed, so a one-sided Jacobi
sweep is cheap, deterministic and accurate to a few ulps.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .geometry import Mat3, RigidTransform, Vec3

DEGENERATE_SV = 1e-15
_MAX_SWEEPS = 60
_PAIRS = ((0, 1), (0, 2), (1, 2))


class DegenerateCovarianceError(ArithmeticError):
    """Raised when the cross-covariance carries no usable rotation information."""

    def __init__(self) -> None:
        super().__init__("degenerate covariance")


class Svd3(NamedTuple):
    """``H = U @ diag(D) @ V.T`` with ``D`` non-negative and descending."""

    U: Mat3
    D: Vec3
    V: Mat3


def svd3(H: ArrayLike) -> Svd3:
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {H.shape}")
    if not np.isfinite(H).all():
        raise ValueError("matrix has non-finite entries")

    # Work on columns as python lists: numpy call overhead dominates at 3x3.
    A = [list(H[:, j]) for j in range(3)]
    V = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]  # columns
    eps = np.finfo(np.float64).eps
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p, q in _PAIRS:
            ap, aq = A[p], A[q]
            alpha = ap[0] * ap[0] + ap[1] * ap[1] + ap[2] * ap[2]
            beta = aq[0] * aq[0] + aq[1] * aq[1] + aq[2] * aq[2]
            gamma = ap[0] * aq[0] + ap[1] * aq[1] + ap[2] * aq[2]
            if gamma == 0.0 or abs(gamma) <= eps * math.sqrt(alpha * beta):
                continue
            rotated = True
            zeta = (beta - alpha) / (2.0 * gamma)
            t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
            c = 1.0 / math.hypot(1.0, t)
            s = c * t
            A[p] = [c * x - s * y for x, y in zip(ap, aq)]
            A[q] = [s * x + c * y for x, y in zip(ap, aq)]
            vp, vq = V[p], V[q]
            V[p] = [c * x - s * y for x, y in zip(vp, vq)]
            V[q] = [s * x + c * y for x, y in zip(vp, vq)]
        if not rotated:
            break

    norms = [math.sqrt(sum(x * x for x in col)) for col in A]
    # Stable sort keeps the original column order among exact ties.
    order = sorted(range(3), key=lambda j: -norms[j])
    D = np.array([norms[j] for j in order])
    Acols = np.array([A[j] for j in order]).T
    Vmat = np.array([V[j] for j in order]).T
    return Svd3(_left_basis(Acols, D), D, Vmat)


def _left_basis(A: np.ndarray, D: np.ndarray) -> Mat3:
    """Orthonormal U with ``U[:, j] * D[j] == A[:, j]`` for the non-null columns."""
    U = np.empty((3, 3))
    U[:, 0] = A[:, 0] / D[0] if D[0] > 0.0 else (1.0, 0.0, 0.0)
    u1 = A[:, 1] - (U[:, 0] @ A[:, 1]) * U[:, 0]
    n1 = np.linalg.norm(u1)
    if D[1] > 0.0 and n1 > 0.0:
        U[:, 1] = u1 / n1
    else:
        # Any unit vector orthogonal to U0; take the least aligned axis.
        e = np.zeros(3)
        e[np.argmin(np.abs(U[:, 0]))] = 1.0
        u1 = e - (U[:, 0] @ e) * U[:, 0]
        U[:, 1] = u1 / np.linalg.norm(u1)
    u2 = np.cross(U[:, 0], U[:, 1])
    U[:, 2] = -u2 if u2 @ A[:, 2] < 0.0 else u2
    return U


def rotation_from_covariance(H: ArrayLike) -> Mat3:
    """Rotation maximizing ``trace(R @ H)``, i.e. ``V @ U.T`` with reflection fix.

    If ``det(V @ U.T) < 0`` the column of ``V`` paired with the smallest
    singular value is negated, which keeps the result in SO(3).
    """
    U, D, V = svd3(H)
    if D[0] < DEGENERATE_SV:
        raise DegenerateCovarianceError()
    R = V @ U.T
    if np.linalg.det(R) < 0.0:
        V = V.copy()
        V[:, 2] = -V[:, 2]
        R = V @ U.T
    return R


def procrustes(H: ArrayLike, s_bar: ArrayLike, t_bar: ArrayLike) -> RigidTransform:
    """Rigid transform from a centered cross-covariance and the two centroids.

    ``H`` is ``sum w (s - s_bar)(t - t_bar)^T``; the rotation maps source
    directions onto target directions and ``tau = t_bar - R s_bar``.
    """
    R = rotation_from_covariance(H)
    s_bar = np.asarray(s_bar, dtype=np.float64).reshape(3)
    t_bar = np.asarray(t_bar, dtype=np.float64).reshape(3)
    return RigidTransform(R, t_bar - R @ s_bar)
