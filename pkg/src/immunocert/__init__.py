"""Delay-differential immune-response model with a Lyapunov-Krasovskii stability certificate."""

from .certificate import Certificate, CertificateChoices, build_certificate
from .config import Numerics, RunConfig, load, parse
from .dde import ConstantHistory, DenseHistory, FunctionHistory, TableHistory, Trajectory, integrate
from .errors import (
    BasinError,
    CertificateInfeasible,
    ConfigurationError,
    DomainError,
    IntegrationError,
    InternalConsistencyError,
)
from .lyapunov import check_basin, envelope, eval_functional_along, eval_functional_initial
from .model import ModelParameters, XiFunction, check_stability_condition, rhs_original, rhs_shifted, stationary_point
from .verify import SweepSpec, VerificationReport, run_sweep, run_verification

__all__ = [
    "BasinError", "Certificate", "CertificateChoices", "CertificateInfeasible", "ConfigurationError",
    "ConstantHistory", "DenseHistory", "DomainError", "FunctionHistory", "IntegrationError",
    "InternalConsistencyError", "ModelParameters", "Numerics", "RunConfig", "SweepSpec", "TableHistory",
    "Trajectory", "VerificationReport", "XiFunction", "build_certificate", "check_basin",
    "check_stability_condition", "envelope", "eval_functional_along", "eval_functional_initial",
    "integrate", "load", "parse", "rhs_original", "rhs_shifted", "run_sweep", "run_verification",
    "stationary_point",
]
