"""Communication-efficient private mean estimation in the local and shuffled models."""

from .accountant import CertificationReport, calibrate_mms_budget, certify, shuffle_amplify
from .binary import BinaryConfig, MeanEstimate, MessageBundle, SamplingPlan, make_plan
from .estimators import BinaryMeanEstimator, L2MeanEstimator, LinfMeanEstimator
from .exceptions import (AmplificationRangeError, CertificationError, DegenerateBudgetError,
                         InputDomainError, MalformedMessageError, MechanismError, ParameterError)
from .experiments import SgdSpec, SweepSpec, run_sweep, run_toy_dpsgd
from .l2 import L2Config
from .linf import BudgetAllocation, LinfBundle, LinfConfig, allocate_budgets
from .rdp import RdpCurve, rdp_to_dp
from .rr import flip_prob_for_budget, ldp_of_flip_prob
from .shuffle import run_pipeline

__version__ = "0.1.0"

__all__ = [
    "AmplificationRangeError", "BinaryConfig", "BinaryMeanEstimator", "BudgetAllocation",
    "CertificationError", "CertificationReport", "DegenerateBudgetError", "InputDomainError",
    "L2Config", "L2MeanEstimator", "LinfBundle", "LinfConfig", "LinfMeanEstimator",
    "MalformedMessageError", "MeanEstimate", "MechanismError", "MessageBundle", "ParameterError",
    "RdpCurve", "SamplingPlan", "SgdSpec", "SweepSpec", "allocate_budgets", "calibrate_mms_budget",
    "certify", "flip_prob_for_budget", "ldp_of_flip_prob", "make_plan", "rdp_to_dp", "run_pipeline",
    "run_sweep", "run_toy_dpsgd", "shuffle_amplify",
]
