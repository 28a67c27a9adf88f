"""Secure over-the-air computation with zero-forced artificial noise."""

from .channel import ChannelProtocol, rayleigh_inverse_cdf, sample_channel, transmit
from .errors import ConfigError, DegenerateDesignError, InfeasibleDesignError, ZeroForcingError
from .model import ChannelRealization, InputBatch, SystemConfig, sample_inputs, validate_config
from .precoding import (
    METHODS,
    Precoder,
    build_precoder,
    build_rre_basis,
    expected_noise_power_at_eve,
    naive_svd_precoder,
    no_noise_precoder,
    noise_budget,
    optimize_known_csi,
    optimize_unknown_csi,
    realized_noise_power_at_eve,
    sample_artificial_noise,
)
from .scaling import (
    ScalingDesign,
    c_sq_of_snr,
    feasible_mu_min,
    scaling_from_mse,
    scaling_improved_bound,
    snr_of,
)
from .security import (
    SchemeDesign,
    SecurityReport,
    approximation_level,
    build_transmit_matrix,
    effective_noise_covariance,
    isotropic_levels,
    mmse_estimate_eve,
    mmse_estimate_legit,
    security_level,
)
from .sim import SweepSpec, run_sweep, run_trial, summarize

__version__ = "0.1.0"
