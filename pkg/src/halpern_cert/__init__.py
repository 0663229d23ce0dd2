"""Quantitative rates for the inexact generalized Halpern iteration.

    x_{n+1} = delta_n f(x_n) + alpha_n x_n + beta_n T x_n + r_n

with ``T`` nonexpansive and ``f`` a rho-contraction. Rates are built from a
bundle of moduli (:mod:`.certificates`), orbits are computed by numba kernels
(:mod:`.iteration`) and every bound is checked by :mod:`.harness`.
"""
from .certificates import (RateCertificate, Target, certify, halpern_rates, phi_Q1, phi_Q1star,
                           psi_Q1, psi_Q1star, sam_rates)
from .config import ConfigError, ExperimentConfig, load, parse
from .harness import Scenario, VerificationReport, run_scenario, run_suite, suite_exit_code
from .iteration import (IterationTrace, ModuliBundle, ParameterSchedule, ProblemInstance, kp, kp0,
                        run)
from .moduli import Kind, Modulus, ProductModulus, RealSequence, validate_modulus
from .schedules import (Example1Params, Example2Params, Example3Params, example1_schedule,
                        example2_schedule, example3_rates, example3_schedule, example_rates,
                        sabach_shtern_check, sabach_shtern_trials)
from .spaces import Norm, NormedSpace

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Example1Params", "Example2Params", "Example3Params", "ExperimentConfig",
    "IterationTrace", "Kind", "Modulus", "ModuliBundle", "Norm", "NormedSpace",
    "ParameterSchedule", "ProblemInstance", "ProductModulus", "RateCertificate", "RealSequence",
    "Scenario", "Target", "VerificationReport", "certify", "example1_schedule",
    "example2_schedule", "example3_rates", "example3_schedule", "example_rates", "halpern_rates",
    "kp", "kp0", "load", "parse", "phi_Q1", "phi_Q1star", "psi_Q1", "psi_Q1star", "run",
    "run_scenario", "run_suite", "sabach_shtern_check", "sabach_shtern_trials", "sam_rates",
    "suite_exit_code", "validate_modulus",
]
