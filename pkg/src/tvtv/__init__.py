"""Consistency-enforcing post-processing of reconstructions by TV-TV minimization."""

__version__ = "0.1.0"

from .errors import TVTVError
from .image import ComplexImage, DiffField, apply_diff, apply_diff_adjoint, tv_seminorm
from .metrics import CropRegion, consistency, psnr, ssim
from .operators import (
    CoilSensitivities,
    MaskedFourier,
    MatrixOperator,
    MeasurementOperator,
    MulticoilFourier,
    SamplingMask,
    make_cartesian_mask,
    project_consistent,
)
from .solver import PRESETS, SolverConfig, SolverResult, complex_soft_threshold, objective, solve_tvtv
from .bound import BoundInputs, prop1_bound, prop1_monte_carlo

__all__ = [
    "__version__", "TVTVError", "ComplexImage", "DiffField", "apply_diff", "apply_diff_adjoint",
    "tv_seminorm", "CropRegion", "consistency", "psnr", "ssim", "CoilSensitivities", "MaskedFourier",
    "MatrixOperator", "MeasurementOperator", "MulticoilFourier", "SamplingMask", "make_cartesian_mask",
    "project_consistent", "PRESETS", "SolverConfig", "SolverResult", "complex_soft_threshold",
    "objective", "solve_tvtv", "BoundInputs", "prop1_bound", "prop1_monte_carlo",
]
