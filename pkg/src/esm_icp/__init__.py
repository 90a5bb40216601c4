"""Rigid point-cloud registration with exponentially weighted similarity matrices."""

__version__ = "0.1.0"

from .correspondence import CorrespondenceSet, NNIndex, build_index, find_correspondences
from .geometry import (
    EulerAngles,
    GeometryError,
    RigidTransform,
    apply_transform,
    centroid,
    compose,
    euler_to_rotation,
    invert,
    rotation_to_euler,
)
from .linalg3 import DegenerateCovarianceError, Svd3, procrustes, svd3
from .metrics import ErrorReport, correspondence_rmse, error_report, rotation_error, translation_error
from .pcio import VoxelFilterParams, read_cloud, voxel_downsample, write_cloud
from .similarity import (
    KernelParams,
    SimilarityCollapseError,
    SimilarityMatrix,
    build_similarity,
    export_heatmap,
    gaussian_weight,
)
from .solver import RegistrationResult, SolverConfig, Termination, esm_icp_step, register, weighted_error
from .synth import NoiseSpec, TransformSampler, corrupt, sample_transform

__all__ = [
    "CorrespondenceSet", "DegenerateCovarianceError", "ErrorReport", "EulerAngles", "GeometryError",
    "KernelParams", "NNIndex", "NoiseSpec", "RegistrationResult", "RigidTransform",
    "SimilarityCollapseError", "SimilarityMatrix", "SolverConfig", "Svd3", "Termination",
    "TransformSampler", "VoxelFilterParams", "apply_transform", "build_index", "build_similarity",
    "centroid", "compose", "correspondence_rmse", "corrupt", "error_report", "esm_icp_step",
    "euler_to_rotation", "export_heatmap", "find_correspondences", "gaussian_weight", "invert",
    "procrustes", "read_cloud", "register", "rotation_error", "rotation_to_euler",
    "sample_transform", "svd3", "translation_error", "voxel_downsample", "weighted_error",
    "write_cloud",
]
