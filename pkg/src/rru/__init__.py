"""Simulation and inference for two-arm trials allocated by a randomly reinforced urn."""
from .errors import ConfigError, UsageError
from .model import (
    DesignConfig, ResponseModel, Truth, UtilityTransform, bernoulli, beta, clip_affine,
    config_from_dict, exponential, identity, indicator, load_config, logistic, normal,
    point_mass, uniform, utility_moment, validate_config,
)
from .montecarlo import StudyPlan, StudyReport, derive_seed, h0_suite, h1_suite, power_curve, run_study
from .urn_engine import UrnState, run_trial, simulate_batch, step

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "UsageError", "DesignConfig", "ResponseModel", "Truth", "UtilityTransform",
    "bernoulli", "beta", "clip_affine", "config_from_dict", "exponential", "identity",
    "indicator", "load_config", "logistic", "normal", "point_mass", "uniform",
    "utility_moment", "validate_config", "StudyPlan", "StudyReport", "derive_seed",
    "h0_suite", "h1_suite", "power_curve", "run_study", "UrnState", "run_trial",
    "simulate_batch", "step",
]
