"""Gaussian correspondence weights and the sparse symmetric similarity matrix."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .correspondence import CorrespondenceSet

DEFAULT_SIGMA = 0.1


class SimilarityCollapseError(ArithmeticError):
    """Every raw weight underflowed to zero, leaving nothing to align."""

    def __init__(self) -> None:
        super().__init__("similarity collapse")


@dataclass(frozen=True)
class KernelParams:
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self) -> None:
        if not (self.sigma > 0.0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a positive finite number, got {self.sigma}")


def gaussian_weight(d: ArrayLike, params: KernelParams) -> NDArray[np.float64] | float:
    """``exp(-d^2 / (2 sigma^2))``; scalar in, scalar out."""
    d = np.asarray(d, dtype=np.float64)
    if (d < 0).any():
        raise ValueError("distances must be non-negative")
    w = np.exp(-(d * d) / (2.0 * params.sigma**2))
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Sparse symmetric N x N matrix stored as coordinate triples sorted by (row, col).

    Only non-zero weights are stored.
    """

    n: int
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    weights: NDArray[np.float64]

    @property
    def nnz(self) -> int:
        return len(self.weights)

    def __getitem__(self, key: tuple[int, int]) -> float:
        i, j = key
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(key)
        k = np.searchsorted(self.rows * self.n + self.cols, i * self.n + j)
        if k < self.nnz and self.rows[k] == i and self.cols[k] == j:
            return float(self.weights[k])
        return 0.0

    def entries(self) -> dict[tuple[int, int], float]:
        return {(int(r), int(c)): float(w) for r, c, w in zip(self.rows, self.cols, self.weights)}

    def to_dense(self) -> NDArray[np.float64]:
        M = np.zeros((self.n, self.n))
        M[self.rows, self.cols] = self.weights
        return M

    def is_symmetric(self) -> bool:
        return self.entries() == {(c, r): w for (r, c), w in self.entries().items()}

    def diagonal_fraction(self) -> float:
        """Share of the total stored weight lying on the diagonal (1.0 for a diagonal M)."""
        total = self.weights.sum()
        if total == 0.0:
            return 0.0
        return float(self.weights[self.rows == self.cols].sum() / total)


def correspondence_weights(corr: CorrespondenceSet, params: KernelParams,
                           normalize: bool = True) -> NDArray[np.float64]:
    """Per-correspondence Gaussian weights.

    With ``normalize`` the weights are divided by their maximum, evaluated as
    ``exp(-(d^2 - d_min^2) / 2 sigma^2)`` so that far-apart clouds do not
    underflow to all zeros. The best match always gets weight 1.
    """
    d2 = corr.distance * corr.distance
    scale = 2.0 * params.sigma**2
    if normalize:
        return np.exp(-(d2 - d2.min()) / scale)
    w = np.exp(-d2 / scale)
    if not w.any():
        raise SimilarityCollapseError()
    return w


def build_similarity(corr: CorrespondenceSet, params: KernelParams,
                     normalize: bool = True,
                     weights: NDArray[np.float64] | None = None) -> SimilarityMatrix:
    """Set ``M[i, c(i)] = M[c(i), i] = w_i`` for ``i = 0 .. N-1`` on a zeroed matrix.

    When two correspondences write the same cell the later source index wins,
    exactly as a dense in-order fill would behave. Pass precomputed
    ``weights`` to skip re-evaluating the kernel.
    """
    n = len(corr)
    if n == 0:
        raise ValueError("empty correspondence set")
    if weights is None:
        weights = correspondence_weights(corr, params, normalize)
    src = np.arange(n, dtype=np.int64)
    tgt = corr.index
    if tgt.min() < 0 or tgt.max() >= n:
        raise ValueError("correspondence index outside the N x N matrix")

    # Write sequence: (0, c0), (c0, 0), (1, c1), (c1, 1), ...
    rows = np.column_stack([src, tgt]).ravel()
    cols = np.column_stack([tgt, src]).ravel()
    vals = np.repeat(weights, 2)
    keys = rows * n + cols
    # Last occurrence of every key = first occurrence in the reversed stream.
    ukeys, first_rev = np.unique(keys[::-1], return_index=True)
    final = vals[::-1][first_rev]
    keep = final > 0.0
    ukeys, final = ukeys[keep], final[keep]
    return SimilarityMatrix(n, ukeys // n, ukeys % n, final)


def export_heatmap(M: SimilarityMatrix, path: str | os.PathLike) -> tuple[str, str]:
    """Write ``<path>.csv`` (dense values) and ``<path>.pgm`` (plain P2 graymap).

    Gray levels are ``round(255 * w / max_w)``; an all-zero matrix maps to black.
    Returns the two file paths.
    """
    dense = M.to_dense()
    base = os.fspath(path)
    csv_path, pgm_path = base + ".csv", base + ".pgm"
    with open(csv_path, "w") as f:
        for row in dense:
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")
    top = dense.max() if dense.size else 0.0
    gray = np.zeros_like(dense, dtype=np.int64) if top <= 0.0 else np.rint(255.0 * dense / top).astype(np.int64)
    with open(pgm_path, "w") as f:
        f.write(f"P2\n{M.n} {M.n}\n255\n")
        for row in gray:
            f.write(" ".join(str(v) for v in row) + "\n")
    return csv_path, pgm_path
