"""Transform error metrics (MSE / RMSE / MAE) and alignment residuals."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .correspondence import build_index, find_correspondences
from .geometry import GeometryError, RigidTransform, apply_transform, as_cloud, is_rotation, rotation_to_euler


class ErrorTriple(NamedTuple):
    mse: float
    rmse: float
    mae: float


def _triple(diff: np.ndarray) -> ErrorTriple:
    diff = np.asarray(diff, dtype=np.float64).ravel()
    mse = float(np.mean(diff * diff))
    return ErrorTriple(mse, math.sqrt(mse), float(np.mean(np.abs(diff))))


def rotation_error(R_est: ArrayLike, R_gt: ArrayLike) -> ErrorTriple:
    """Statistics over the nine entries of ``R_est - R_gt``.

    For ``R_est = I`` the MSE reduces to ``(6 - 2 trace(R_gt)) / 9``, so a
    half-turn miss reads as 8/9.
    """
    R_est, R_gt = np.asarray(R_est, dtype=np.float64), np.asarray(R_gt, dtype=np.float64)
    if not (is_rotation(R_est, 1e-9) and is_rotation(R_gt, 1e-9)):
        raise GeometryError("rotation_error needs two proper rotation matrices")
    return _triple(R_est - R_gt)


def euler_rotation_error(R_est: ArrayLike, R_gt: ArrayLike) -> ErrorTriple:
    """Statistics over the (roll, pitch, yaw) differences in radians, wrapped to [-pi, pi)."""
    d = np.subtract(rotation_to_euler(R_est), rotation_to_euler(R_gt))
    return _triple((d + math.pi) % (2 * math.pi) - math.pi)


def translation_error(t_est: ArrayLike, t_gt: ArrayLike) -> ErrorTriple:
    t_est = np.asarray(t_est, dtype=np.float64).reshape(3)
    t_gt = np.asarray(t_gt, dtype=np.float64).reshape(3)
    if not (np.isfinite(t_est).all() and np.isfinite(t_gt).all()):
        raise ValueError("translations must be finite")
    return _triple(t_est - t_gt)


@dataclass(frozen=True)
class ErrorReport:
    mse_r: float
    rmse_r: float
    mae_r: float
    mse_t: float
    rmse_t: float
    mae_t: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


FIELDS = ("mse_r", "rmse_r", "mae_r", "mse_t", "rmse_t", "mae_t")


def error_report(estimate: RigidTransform, ground_truth: RigidTransform,
                 rotation_metric: str = "matrix") -> ErrorReport:
    """Compare two transforms that both map source coordinates to target coordinates.

    ``rotation_metric="euler"`` swaps the matrix-entry rotation block for
    Euler-angle residuals in radians.
    """
    if rotation_metric == "matrix":
        r = rotation_error(estimate.R, ground_truth.R)
    elif rotation_metric == "euler":
        r = euler_rotation_error(estimate.R, ground_truth.R)
    else:
        raise ValueError(f"unknown rotation metric {rotation_metric!r}")
    t = translation_error(estimate.tau, ground_truth.tau)
    return ErrorReport(*r, *t)


def correspondence_rmse(source: ArrayLike, target: ArrayLike, T: RigidTransform) -> float:
    """Root mean squared distance from each transformed source point to its nearest target."""
    moved = apply_transform(as_cloud(source), T)
    corr = find_correspondences(moved, build_index(target))
    return float(math.sqrt(np.mean(corr.distance**2)))
