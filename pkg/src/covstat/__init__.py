"""
Bootstrapped max-correlation test of covariance stationarity.

Systematic-sample autocorrelations built from Walsh or composite Haar square
waves are compared with full-sample autocorrelations; the largest scaled
difference is referred to a dependent wild bootstrap distribution.
"""

from covstat.basis import BasisKind, BasisMatrix, basis_matrix, haar_composite_eval, systematic_sample, walsh_eval
from covstat.bootstrap import BootstrapConfig, TestResult, Variant, block_partition, run_test
from covstat.dgp import DgpSpec, ErrorKind, Model, generate
from covstat.exceptions import ConfigurationError, CovStatError, DegenerateSeriesError, DomainError, InputError
from covstat.mc import McConfig, McReport, run_mc, schedule_lookup
from covstat.stats import (
    AddPowerPenalty,
    DiffMatrix,
    Grid,
    HacWeights,
    LjungBoxWeights,
    SqrtProdPenalty,
    center,
    diff_matrix,
    jww_stat,
    max_max,
    max_stat,
    penalized_stat,
    weighted_penalized_stat,
)

__version__ = "0.1.0"

__all__ = [
    "AddPowerPenalty",
    "BasisKind",
    "BasisMatrix",
    "BootstrapConfig",
    "ConfigurationError",
    "CovStatError",
    "DegenerateSeriesError",
    "DgpSpec",
    "DiffMatrix",
    "DomainError",
    "ErrorKind",
    "Grid",
    "HacWeights",
    "InputError",
    "LjungBoxWeights",
    "McConfig",
    "McReport",
    "Model",
    "SqrtProdPenalty",
    "TestResult",
    "Variant",
    "basis_matrix",
    "block_partition",
    "center",
    "diff_matrix",
    "generate",
    "haar_composite_eval",
    "jww_stat",
    "max_max",
    "max_stat",
    "penalized_stat",
    "run_mc",
    "run_test",
    "schedule_lookup",
    "systematic_sample",
    "walsh_eval",
    "weighted_penalized_stat",
]
