"""Simulation and stability certificates for Caputo-fractional stochastic systems
with Wiener noise and compensated Poisson jumps."""

from .certify import (
    HypothesisConstants,
    StabilityCertificate,
    build_certificate,
    compute_M,
    compute_Q1,
    compute_Q2,
    exp_rate,
    fixed_point_radius,
    lbeta_norm,
    stability_delta,
)
from .config import Config, parse_config, parse_text, serialize_config
from .errors import FracStabError
from .fracops import SampledPath, caputo_derivative, deterministic_residual, rl_integral
from .mittag_leffler import (
    MLEnvelope,
    MLEvaluation,
    fit_envelope,
    laplace_residual,
    ml_matrix,
    ml_scalar,
)
from .plot import write_svg
from .solver import Trajectory, conv_weights, simulate_example4, simulate_path
from .stats import DecayFit, EnsembleStats, fit_decay, isometry_report, run_ensemble
from .stochastic import JumpMeasure, RngStream
from .system import FracSystem, Nonlinearity, example4_system

__version__ = "0.1.0"
