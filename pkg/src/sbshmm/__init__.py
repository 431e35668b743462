"""State-by-state model selection for nonparametric hidden Markov models."""

from .bases import Basis, BasisKind, CoefficientDensity, make_basis, project_true_density
from .calibration import CalibrationMode, calibrate, calibrated_selection, jump_curve
from .crossval import cv_select, cv_split
from .diagnostics import hdet_diagnostic
from .leastsq import LsProblem, ls_criterion, ls_estimate, ls_family
from .moments import MomentTensors, accumulate_moments, merge_moments, population_moments
from .params import HmmParams
from .selection import (EstimatorFamily, PenaltyKind, Variant, align_family, compute_A,
                        penalty_shape, select_models, selected_estimates)
from .simulation import GroundTruth, d_perm, benchmark_truth, sample_hmm, stationary_distribution
from .spectral import spectral_estimate, spectral_family

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "BasisKind",
    "CoefficientDensity",
    "make_basis",
    "project_true_density",
    "CalibrationMode",
    "calibrate",
    "calibrated_selection",
    "jump_curve",
    "cv_select",
    "cv_split",
    "hdet_diagnostic",
    "LsProblem",
    "ls_criterion",
    "ls_estimate",
    "ls_family",
    "MomentTensors",
    "accumulate_moments",
    "merge_moments",
    "population_moments",
    "HmmParams",
    "EstimatorFamily",
    "PenaltyKind",
    "Variant",
    "align_family",
    "compute_A",
    "penalty_shape",
    "select_models",
    "selected_estimates",
    "GroundTruth",
    "d_perm",
    "benchmark_truth",
    "sample_hmm",
    "stationary_distribution",
    "spectral_estimate",
    "spectral_family",
]
