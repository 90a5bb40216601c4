"""Point clouds, rigid transforms and Euler-angle conversion.

Clouds are plain ``(N, 3)`` float64 numpy arrays; row ``i`` always refers to
the same point. Rotations use the extrinsic x-y-z convention,
``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray

Points: TypeAlias = NDArray[np.float64]  # (N, 3)
Mat3: TypeAlias = NDArray[np.float64]  # (3, 3)
Vec3: TypeAlias = NDArray[np.float64]  # (3,)

ORTHO_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid geometric input (empty cloud, non-finite values, bad rotation)."""


def as_cloud(points: ArrayLike, *, allow_empty: bool = False) -> Points:
    """Validate and convert ``points`` to a contiguous ``(N, 3)`` float64 array."""
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GeometryError(f"expected an (N, 3) array, got shape {arr.shape}")
    if arr.shape[0] == 0 and not allow_empty:
        raise GeometryError("empty cloud")
    if not np.isfinite(arr).all():
        raise GeometryError("cloud contains non-finite coordinates")
    return arr


def is_rotation(R: ArrayLike, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.isfinite(R).all():
        return False
    ortho = np.abs(R.T @ R - np.eye(3)).max()
    return bool(ortho < tol and abs(np.linalg.det(R) - 1.0) < tol)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation ``R`` (SO(3)) followed by translation ``tau``: ``x -> R x + tau``."""

    R: Mat3
    tau: Vec3

    def __post_init__(self) -> None:
        R = np.array(self.R, dtype=np.float64).reshape(3, 3)
        tau = np.array(self.tau, dtype=np.float64).reshape(3)
        if not np.isfinite(tau).all():
            raise GeometryError("translation must be finite")
        if not is_rotation(R):
            raise GeometryError("R is not a proper rotation matrix")
        R.flags.writeable = False
        tau.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, A: ArrayLike) -> RigidTransform:
        """Build from a 4x4 homogeneous matrix; the bottom row must be ``0 0 0 1``."""
        A = np.asarray(A, dtype=np.float64)
        if A.shape != (4, 4):
            raise GeometryError(f"expected a 4x4 matrix, got shape {A.shape}")
        if np.abs(A[3] - (0.0, 0.0, 0.0, 1.0)).max() > ORTHO_TOL:
            raise GeometryError("bottom row of a homogeneous transform must be 0 0 0 1")
        return cls(A[:3, :3], A[:3, 3])

    @classmethod
    def from_euler(cls, angles: EulerAngles | tuple[float, float, float],
                   tau: ArrayLike = (0.0, 0.0, 0.0)) -> RigidTransform:
        return cls(euler_to_rotation(angles), tau)

    def matrix(self) -> NDArray[np.float64]:
        """Homogeneous 4x4 form."""
        A = np.eye(4)
        A[:3, :3] = self.R
        A[:3, 3] = self.tau
        return A

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return compose(self, other)

    def __repr__(self) -> str:
        return f"RigidTransform(R={self.R.tolist()}, tau={self.tau.tolist()})"


class EulerAngles(NamedTuple):
    """Roll about x, pitch about y, yaw about z, in radians."""

    r: float
    p: float
    y: float


def centroid(cloud: ArrayLike) -> Vec3:
    return as_cloud(cloud).mean(axis=0)


def apply_transform(cloud: ArrayLike, T: RigidTransform) -> Points:
    pts = as_cloud(cloud, allow_empty=True)
    return pts @ T.R.T + T.tau


def compose(A: RigidTransform, B: RigidTransform) -> RigidTransform:
    """Transform applying ``B`` first, then ``A``."""
    return RigidTransform(A.R @ B.R, A.R @ B.tau + A.tau)


def invert(T: RigidTransform) -> RigidTransform:
    Rt = T.R.T
    return RigidTransform(Rt, -(Rt @ T.tau))


def rot_x(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(angles: EulerAngles | tuple[float, float, float]) -> Mat3:
    r, p, y = (float(a) for a in angles)
    if not all(math.isfinite(a) for a in (r, p, y)):
        raise GeometryError("Euler angles must be finite")
    return rot_z(y) @ rot_y(p) @ rot_x(r)


def rotation_to_euler(R: ArrayLike) -> EulerAngles:
    """Inverse of :func:`euler_to_rotation`.

    Returns roll and yaw in ``[-pi, pi]`` and pitch in ``[-pi/2, pi/2]``. At
    gimbal lock (``|pitch| = pi/2``) roll is set to zero and yaw carries the
    remaining rotation about the collapsed axis.
    """
    R = np.asarray(R, dtype=np.float64)
    if not is_rotation(R, tol=1e-9):
        raise GeometryError("input is not a proper rotation matrix")
    cos_p = math.hypot(R[0, 0], R[1, 0])
    p = math.atan2(-R[2, 0], cos_p)
    if cos_p < 1e-12:
        return EulerAngles(0.0, p, math.atan2(-R[0, 1], R[1, 1]))
    return EulerAngles(math.atan2(R[2, 1], R[2, 2]), p, math.atan2(R[1, 0], R[0, 0]))
