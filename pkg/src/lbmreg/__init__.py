"""Robust nonparametric regression under Huber contamination.

The local binning median (LBM) splits ``[0, 1]^d`` into ``m^d`` boxes and
takes the lower median of the responses in each; the medians can then be
smoothed by integrated-kernel weights or local polynomial regression.
"""

from .baselines import (TruncationSpec, clamp, direct_kernel_predict, direct_lpr_predict,
                        truncated_kernel_predict)
from .contam import (AdversaryKind, ContaminationModel, Observations, count_adversaries_per_bin,
                     derive_seed, point_mass, sample_observations, shifted_gaussian,
                     symmetric_bernoulli)
from .core import (GridSpec, HolderSpec, SobolevSpec, TestFunction, constant, make_grid, median,
                   peak2d, polynomial, ramp)
from .exceptions import (BoundaryError, CapacityError, ConditioningError, ConfigError,
                         DimensionError, DomainError, EmptyBinError, LbmregError, WindowError)
from .harness import (ExperimentConfig, EstimatorSettings, RiskReport, emit_report, fit_rate,
                      l2_risk, load_config, parse_config, run_experiment)
from .lbm import LbmFit, bin_index, choose_m_holder, lbm_fit, lbm_predict
from .postprocess import (BandwidthPlan, KernelSpec, PolyBasis, choose_postprocess_params,
                          get_kernel, kernel_weight, kernel_weights, ks_predict, lpr_predict)

__version__ = "0.1.0"

__all__ = [
    "AdversaryKind", "BandwidthPlan", "BoundaryError", "CapacityError", "ConditioningError",
    "ConfigError", "ContaminationModel", "DimensionError", "DomainError", "EmptyBinError",
    "EstimatorSettings", "ExperimentConfig", "GridSpec", "HolderSpec", "KernelSpec", "LbmFit",
    "LbmregError", "Observations", "PolyBasis", "RiskReport", "SobolevSpec", "TestFunction",
    "TruncationSpec", "WindowError", "bin_index", "choose_m_holder", "choose_postprocess_params",
    "clamp", "constant", "count_adversaries_per_bin", "derive_seed", "direct_kernel_predict",
    "direct_lpr_predict", "emit_report", "fit_rate", "get_kernel", "kernel_weight",
    "kernel_weights", "ks_predict", "l2_risk", "lbm_fit", "lbm_predict", "load_config",
    "lpr_predict", "make_grid", "median", "parse_config", "peak2d", "point_mass", "polynomial",
    "ramp", "run_experiment", "sample_observations", "shifted_gaussian", "symmetric_bernoulli",
    "truncated_kernel_predict",
]
