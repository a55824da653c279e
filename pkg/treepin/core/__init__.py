"""Core models, closed forms and tree simulation."""

from .exceptions import TreePinError, ConfigurationError, DomainError
from .models import (
    GaussianDisorder, BernoulliDisorder, ConstantDisorder, ShiftedDisorder,
    NoDefect, BranchShift, SubtreeConstant, SubtreeShift,
    ModelSpec, NodeAddress, Realization, PhaseLabel, CriticalData,
)
from .config import config, RunConfig, load_run_config
from .disorder import log_mgf, log_mgf_deriv, mean_var, node_uniform, sample_node
from .closedform import beta_c, phi, classify_st
from .treesim import log_partition, brute_force_log_partition, st_decomposition
from .montecarlo import estimate_free_energy, phase_scan

__all__ = [
    "TreePinError", "ConfigurationError", "DomainError",
    "GaussianDisorder", "BernoulliDisorder", "ConstantDisorder", "ShiftedDisorder",
    "NoDefect", "BranchShift", "SubtreeConstant", "SubtreeShift",
    "ModelSpec", "NodeAddress", "Realization", "PhaseLabel", "CriticalData",
    "config", "RunConfig", "load_run_config",
    "log_mgf", "log_mgf_deriv", "mean_var", "node_uniform", "sample_node",
    "beta_c", "phi", "classify_st",
    "log_partition", "brute_force_log_partition", "st_decomposition",
    "estimate_free_energy", "phase_scan",
]
