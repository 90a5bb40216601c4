"""ESM-ICP: ICP whose cross-covariance is modulated by a Gaussian similarity matrix.

Every iteration matches each (moving) source point to its nearest target
point, weights the match by ``exp(-d^2 / 2 sigma^2)``, scatters the weights
into a symmetric matrix ``M`` with ``M[i, c(i)] = M[c(i), i] = w_i``, and fits
a rigid transform to ``H = S_c^T M T_c`` where ``S_c`` and ``T_c`` are the
centroid-subtracted clouds. ``mode="classic"`` sets every weight to one and
uses only the directed pairs, which is plain point-to-point ICP.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .correspondence import CorrespondenceSet, NNIndex, build_index, find_correspondences
from .geometry import Points, RigidTransform, apply_transform, as_cloud, compose
from .linalg3 import procrustes
from .similarity import (
    KernelParams,
    SimilarityMatrix,
    build_similarity,
    correspondence_weights,
    export_heatmap,
)

log = logging.getLogger(__name__)

MODES = ("esm", "classic")
H_FORMS = ("matrix", "directed")


class Termination(str, Enum):
    CONVERGED_ERROR = "converged_error"
    CONVERGED_TRANSFORM = "converged_transform"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for :func:`register`.

    ``h_form="matrix"`` sums ``M[a, b] (s_a - s_bar)(t_b - t_bar)^T`` over every
    stored entry of the symmetric ``M``; ``"directed"`` keeps only the
    ``(i, c(i))`` pairs, i.e. ordinary weighted Procrustes.
    """

    sigma: float = 0.1
    max_iterations: int = 100
    epsilon_error: float = 1e-12
    epsilon_transform: float = 1e-10
    mode: str = "esm"
    normalize_weights: bool = True
    centroid_prealign: bool = True
    record_snapshots: bool = False
    h_form: str = "matrix"

    def __post_init__(self) -> None:
        KernelParams(self.sigma)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.epsilon_error < 0 or self.epsilon_transform < 0:
            raise ValueError("convergence thresholds must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.h_form not in H_FORMS:
            raise ValueError(f"h_form must be one of {H_FORMS}, got {self.h_form!r}")

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.sigma)


class StepResult(NamedTuple):
    transform: RigidTransform
    error: float
    similarity: SimilarityMatrix | None  # None in classic mode


@dataclass(frozen=True, eq=False)
class IterationRecord:
    k: int
    error: float
    increment: RigidTransform
    accumulated: RigidTransform
    similarity: SimilarityMatrix | None = None


@dataclass(eq=False)
class RegistrationResult:
    final_transform: RigidTransform
    trace: list[IterationRecord] = field(default_factory=list)
    termination: Termination = Termination.MAX_ITERATIONS

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def converged(self) -> bool:
        return self.termination is not Termination.MAX_ITERATIONS

    @property
    def errors(self) -> NDArray[np.float64]:
        return np.array([rec.error for rec in self.trace])


def weighted_error(source: ArrayLike, target: ArrayLike, corr: CorrespondenceSet,
                   weights: ArrayLike, T: RigidTransform) -> float:
    """``sum_i w_i |R s_i + tau - t_c(i)|^2``."""
    src, tgt = as_cloud(source), as_cloud(target)
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != len(src) or len(corr) != len(src):
        raise ValueError("weights and correspondences must have one entry per source point")
    r = apply_transform(src, T) - tgt[corr.index]
    return float(w @ np.einsum("ij,ij->i", r, r))


def cross_covariance(src_centered: Points, tgt_centered: Points, rows: ArrayLike,
                     cols: ArrayLike, weights: ArrayLike) -> NDArray[np.float64]:
    """``sum_k weights[k] * src_centered[rows[k]] (outer) tgt_centered[cols[k]]``."""
    w = np.asarray(weights, dtype=np.float64)
    return (src_centered[rows] * w[:, None]).T @ tgt_centered[cols]


def esm_icp_step(source_current: ArrayLike, target: ArrayLike, index: NNIndex,
                 config: SolverConfig) -> StepResult:
    """One correspondence + weighting + Procrustes pass.

    Returns the incremental transform, the weighted error evaluated at it with
    this iteration's weights, and the similarity matrix (``None`` for classic).
    """
    src, tgt = as_cloud(source_current), as_cloud(target)
    corr = find_correspondences(src, index)
    n = len(src)
    M = None
    if config.mode == "classic":
        w = np.ones(n)
        rows, cols, vals = np.arange(n), corr.index, w
    else:
        w = correspondence_weights(corr, config.kernel, config.normalize_weights)
        M = build_similarity(corr, config.kernel, config.normalize_weights, weights=w)
        if config.h_form == "matrix":
            rows, cols, vals = M.rows, M.cols, M.weights
        else:
            rows, cols, vals = np.arange(n), corr.index, w

    s_bar = src.mean(axis=0)
    t_bar = tgt.mean(axis=0)
    H = cross_covariance(src - s_bar, tgt - t_bar, rows, cols, vals)
    T = procrustes(H, s_bar, t_bar)
    return StepResult(T, weighted_error(src, tgt, corr, w, T), M)


def register(source: ArrayLike, target: ArrayLike,
             config: SolverConfig | None = None) -> RegistrationResult:
    """Estimate the rigid transform mapping ``source`` onto ``target``.

    Stops when consecutive errors differ by less than ``epsilon_error``, when
    the incremental transform is within ``epsilon_transform`` of identity
    (max-norm of ``A_k - I``), or after ``max_iterations`` passes.
    """
    config = config or SolverConfig()
    src0, tgt = as_cloud(source), as_cloud(target)
    if config.mode == "esm" and len(src0) != len(tgt):
        raise ValueError(f"ESM mode needs equally sized clouds, got {len(src0)} and {len(tgt)}")
    index = build_index(tgt)

    total = RigidTransform.identity()
    if config.centroid_prealign:
        total = RigidTransform(np.eye(3), tgt.mean(axis=0) - src0.mean(axis=0))
    current = apply_transform(src0, total)

    result = RegistrationResult(total)
    prev_error = None
    eye4 = np.eye(4)
    for k in range(1, config.max_iterations + 1):
        step = esm_icp_step(current, tgt, index, config)
        total = compose(step.transform, total)
        current = apply_transform(src0, total)
        result.trace.append(IterationRecord(
            k, step.error, step.transform, total,
            step.similarity if config.record_snapshots else None))
        result.final_transform = total
        if np.abs(step.transform.matrix() - eye4).max() < config.epsilon_transform:
            result.termination = Termination.CONVERGED_TRANSFORM
            break
        if prev_error is not None and abs(step.error - prev_error) < config.epsilon_error:
            result.termination = Termination.CONVERGED_ERROR
            break
        prev_error = step.error
    log.debug("registration stopped after %d iterations (%s)", result.iterations,
              result.termination.value)
    return result


TRACE_HEADER = ["iteration", "error"] + [f"a{r}{c}" for r in range(4) for c in range(4)]


def write_trace(result: RegistrationResult, path: str | os.PathLike) -> None:
    """CSV: iteration, E_k and the 16 row-major entries of the incremental ``A_k``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRACE_HEADER)
        for rec in result.trace:
            w.writerow([rec.k, repr(rec.error)] + [repr(float(v)) for v in rec.increment.matrix().ravel()])


def read_trace(path: str | os.PathLike) -> list[tuple[int, float, NDArray[np.float64]]]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != TRACE_HEADER:
        raise ValueError(f"{path}: not a trace file")
    return [(int(r[0]), float(r[1]), np.array(r[2:], dtype=np.float64).reshape(4, 4)) for r in rows[1:]]


def export_snapshots(result: RegistrationResult, directory: str | os.PathLike) -> list[str]:
    """Write ``m_iter_<k>.csv/.pgm`` for every recorded similarity matrix."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for rec in result.trace:
        if rec.similarity is not None:
            written.extend(export_heatmap(rec.similarity, os.path.join(directory, f"m_iter_{rec.k}")))
    return written
