"""Spike-count estimation for high-dimensional covariance matrices.

Estimates how many population eigenvalues sit above the unit bulk from the
spectrum of a sample covariance matrix, in the proportional regime p/n -> c.
Ships the classical information criterion, penalty-modified variants that
stay consistent arbitrarily close to the detectability edge, a
consecutive-gap rule, an automatic null-model calibration of the gap
parameter, and a reproducible Monte-Carlo comparison harness.
"""

__version__ = "0.1.0"

from .calibration import CalibrationResult, calibrate_delta
from .errors import ConfigError, DataError, NumericError, SpikecountError
from .estimators import (
    CriterionProfile,
    EstimatorKind,
    EstimatorSpec,
    SelectionResult,
    criterion_profile,
    default_schedules,
    estimate_spikes,
    full_aic_value,
    py_estimate,
    select_k,
)
from .rmt import (
    MpLaw,
    Regime,
    ThresholdReport,
    invert_monotone,
    mp_cdf,
    mp_density,
    mp_law,
    penalty_alpha,
    regime_for,
    signal_strength,
    signal_strength_large_c,
    spike_forward,
    stein_loss,
    thresholds,
)
from .simulation import (
    ExperimentPlan,
    MonteCarloReport,
    SpikedPopulation,
    metrics,
    plan_from_dict,
    preset_names,
    preset_plan,
    run_monte_carlo,
    sample_spiked_gaussian,
)
from .spectra import (
    Divisor,
    EigenSpectrum,
    eigenvalues_descending,
    sample_covariance,
    spectrum_from_data,
    spectrum_via_gram,
    trailing_means,
)

__all__ = [
    "__version__",
    "CalibrationResult",
    "ConfigError",
    "CriterionProfile",
    "DataError",
    "Divisor",
    "EigenSpectrum",
    "EstimatorKind",
    "EstimatorSpec",
    "ExperimentPlan",
    "MonteCarloReport",
    "MpLaw",
    "NumericError",
    "Regime",
    "SelectionResult",
    "SpikecountError",
    "SpikedPopulation",
    "ThresholdReport",
    "calibrate_delta",
    "criterion_profile",
    "default_schedules",
    "eigenvalues_descending",
    "estimate_spikes",
    "full_aic_value",
    "invert_monotone",
    "metrics",
    "mp_cdf",
    "mp_density",
    "mp_law",
    "penalty_alpha",
    "plan_from_dict",
    "preset_names",
    "preset_plan",
    "py_estimate",
    "regime_for",
    "run_monte_carlo",
    "sample_covariance",
    "sample_spiked_gaussian",
    "select_k",
    "signal_strength",
    "signal_strength_large_c",
    "spectrum_from_data",
    "spectrum_via_gram",
    "spike_forward",
    "stein_loss",
    "thresholds",
    "trailing_means",
]
