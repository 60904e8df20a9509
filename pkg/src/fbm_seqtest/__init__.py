"""Bayesian sequential testing of the sign of the drift of a fractional Brownian motion.

Submodules:

* :mod:`~fbm_seqtest.specfun`: gamma, beta, digamma, 2F1, normal law;
* :mod:`~fbm_seqtest.model`: parameters, constants, cost, time change, payoffs;
* :mod:`~fbm_seqtest.fbm_sim`: exact fBm and observation sampling;
* :mod:`~fbm_seqtest.whitening`: fractional observation to Brownian coordinates;
* :mod:`~fbm_seqtest.boundary`: the stopping boundary and its checks;
* :mod:`~fbm_seqtest.testbench`: running the test and Monte Carlo risk;
* :mod:`~fbm_seqtest.artifacts`: JSON/CSV input and output;
* :mod:`~fbm_seqtest.cli`: the command-line front end.
"""

from .boundary import (BoundaryTable, FingerprintError, RangeError, SolverError, SolverOptions,
                       boundary_at, check_table, residual, solve_boundary)
from .fbm_sim import PRIOR_DRAW, fixed_theta, sample_fbm, sample_observation
from .model import ContractError, ModelParams, derive_constants
from .testbench import (RiskReport, TestOutcome, estimate_risk, perturbation_study,
                        risk_via_value, run_test)
from .whitening import posterior_trajectory, whiten

__version__ = "0.1.0"

__all__ = [
    "BoundaryTable",
    "ContractError",
    "FingerprintError",
    "ModelParams",
    "PRIOR_DRAW",
    "RangeError",
    "RiskReport",
    "SolverError",
    "SolverOptions",
    "TestOutcome",
    "boundary_at",
    "check_table",
    "derive_constants",
    "estimate_risk",
    "fixed_theta",
    "perturbation_study",
    "posterior_trajectory",
    "residual",
    "risk_via_value",
    "run_test",
    "sample_fbm",
    "sample_observation",
    "solve_boundary",
    "whiten",
]
