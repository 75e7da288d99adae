"""Scheduling dimension reduction for affine LPV models."""

from .core import (AffineLpvModel, Normalizer, TrajectoryDataset, apply_normalizer,
                   eval_model, fit_normalizer, invert_normalizer, split_blocks,
                   vectorize_variation)
from .dnn import DnnReducer, extract_reduced_model, fit_dnn
from .evaluation import EvaluationReport, frobenius_cost, sweep
from .kpca import KernelSpec, fit_kpca
from .manipulator import ManipulatorParams, build_lpv_model, scheduling_map
from .pca import fit_pca, pca_reduced_model
from .refit import fit_affine_matrices
from .ae import fit_ae

__version__ = "0.1.0"
