"""Random rigid transforms and clipped Gaussian-mixture outlier corruption."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .geometry import Points, RigidTransform, as_cloud, euler_to_rotation

# (std, clip_lo, clip_hi) per component.
DEFAULT_NOISE_COMPONENTS: tuple[tuple[float, float, float], ...] = (
    (0.01, -0.05, 0.05),
    (0.04, -1.0, 1.0),
    (0.1, -10.0, 10.0),
)


def _check_range(name: str, rng: tuple[float, float]) -> tuple[float, float]:
    lo, hi = (float(v) for v in rng)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError(f"{name} must be a finite [lo, hi] with lo <= hi, got {rng}")
    return lo, hi


class TransformSampler:
    """Seeded stream of rigid transforms.

    Roll, pitch and yaw are each uniform on ``rotation_range``; the three
    translation components are each uniform on ``translation_range``.
    """

    def __init__(self, rotation_range: tuple[float, float] = (-math.pi, math.pi),
                 translation_range: tuple[float, float] = (-1.0, 1.0), seed: int = 0) -> None:
        self.rotation_range = _check_range("rotation_range", rotation_range)
        self.translation_range = _check_range("translation_range", translation_range)
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)

    def sample(self) -> RigidTransform:
        angles = self._rng.uniform(*self.rotation_range, size=3)
        tau = self._rng.uniform(*self.translation_range, size=3)
        return RigidTransform(euler_to_rotation(angles), tau)

    def sample_angles(self, n: int) -> NDArray[np.float64]:
        """Draw ``n`` raw (roll, pitch, yaw) triples; advances the same stream."""
        return self._rng.uniform(*self.rotation_range, size=(n, 3))


def sample_transform(sampler: TransformSampler) -> RigidTransform:
    return sampler.sample()


@dataclass(frozen=True)
class NoiseSpec:
    """Outlier model: ``fraction`` of the points get clipped mixture noise.

    ``scale="variance"`` reads the first entry of each component as a
    variance instead of a standard deviation. With ``per_coordinate`` each
    coordinate picks its own mixture component instead of one per point.
    """

    fraction: float = 0.0
    components: tuple[tuple[float, float, float], ...] = DEFAULT_NOISE_COMPONENTS
    mixture_weights: tuple[float, ...] | None = None
    seed: int = 0
    per_coordinate: bool = False
    scale: str = "std"
    _probs: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")
        comps = tuple(tuple(float(v) for v in c) for c in self.components)
        if not comps:
            raise ValueError("at least one noise component is required")
        for std, lo, hi in comps:
            if std < 0 or lo > hi:
                raise ValueError(f"bad noise component {(std, lo, hi)}")
        object.__setattr__(self, "components", comps)
        if self.scale not in ("std", "variance"):
            raise ValueError("scale must be 'std' or 'variance'")
        weights = self.mixture_weights or (1.0,) * len(comps)
        if len(weights) != len(comps) or min(weights) <= 0:
            raise ValueError("mixture_weights must be positive, one per component")
        total = float(sum(weights))
        if self.mixture_weights is not None and abs(total - 1.0) > 1e-9:
            raise ValueError("mixture_weights must sum to 1")
        object.__setattr__(self, "_probs", tuple(float(w) / total for w in weights))

    @property
    def stds(self) -> NDArray[np.float64]:
        s = np.array([c[0] for c in self.components])
        return np.sqrt(s) if self.scale == "variance" else s


def corrupted_count(fraction: float, n: int) -> int:
    """``round(fraction * n)`` with halves rounded away from zero."""
    return int(math.floor(fraction * n + 0.5))


def corrupt(cloud: ArrayLike, spec: NoiseSpec) -> tuple[Points, NDArray[np.int64]]:
    """Displace a random subset of points; returns the new cloud and the sorted indices."""
    pts = as_cloud(cloud)
    n = len(pts)
    m = corrupted_count(spec.fraction, n)
    out = pts.copy()
    if m == 0:
        return out, np.empty(0, dtype=np.int64)
    rng = np.random.default_rng(spec.seed)
    chosen = np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)
    k = len(spec.components)
    shape = (m, 3) if spec.per_coordinate else (m, 1)
    comp = np.broadcast_to(rng.choice(k, size=shape, p=spec._probs), (m, 3))
    table = np.array(spec.components)
    std = spec.stds[comp]
    draw = rng.standard_normal((m, 3)) * std
    disp = np.clip(draw, table[comp, 1], table[comp, 2])
    out[chosen] += disp
    return out, chosen
