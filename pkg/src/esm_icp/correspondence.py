"""Exact nearest-neighbour correspondences from source points to a target cloud."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .geometry import Points, as_cloud

# Candidates fetched per query before exact re-ranking.
_K = 4


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """``index[i]`` is the target matched to source point ``i``; ``distance[i]`` its range."""

    index: NDArray[np.int64]
    distance: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.index)


def _sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a - b
    return d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]


class NNIndex:
    """k-d tree over a target cloud answering exact 1-NN queries.

    Ties on squared distance go to the lowest target index. Duplicate target
    points are kept as-is.
    """

    def __init__(self, target: ArrayLike) -> None:
        self.points: Points = as_cloud(target)
        self.points.flags.writeable = False
        self._tree = cKDTree(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def query(self, queries: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        q = as_cloud(queries, allow_empty=True)
        n = len(self.points)
        if len(q) == 0:
            return np.empty(0, dtype=np.int64), np.empty(0)
        k = min(_K, n)
        _, cand = self._tree.query(q, k=k)
        cand = np.asarray(cand, dtype=np.int64).reshape(len(q), k)
        # Re-rank with one fixed formula so ties are decided identically everywhere.
        d2 = _sq_dist(self.points[cand], q[:, None, :])
        best = d2.min(axis=1)
        idx = np.where(d2 == best[:, None], cand, n).min(axis=1)

        if k < n:
            # More than k points could sit at (almost) the same distance.
            crowded = np.flatnonzero(d2.max(axis=1) <= best * (1.0 + 1e-9))
            for row in crowded:
                radius = np.sqrt(best[row]) * (1.0 + 1e-6) + 1e-300
                pool = np.array(self._tree.query_ball_point(q[row], radius), dtype=np.int64)
                pd2 = _sq_dist(self.points[pool], q[row])
                best[row] = pd2.min()
                idx[row] = pool[pd2 == best[row]].min()
        return idx, np.sqrt(best)


def build_index(target: ArrayLike) -> NNIndex:
    return NNIndex(target)


def find_correspondences(source: ArrayLike, index: NNIndex) -> CorrespondenceSet:
    src = as_cloud(source)
    idx, dist = index.query(src)
    return CorrespondenceSet(idx, dist)

