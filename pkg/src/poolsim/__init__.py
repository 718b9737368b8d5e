"""Correlated default timing in large loan pools.

Monte Carlo simulation of the finite interacting-intensity system, plus
three independent solvers for the infinite-pool limiting loss (truncated
moment SDE system, explicit finite-difference SPDE scheme, mean-field
fixed-point iteration) and risk statistics for comparing them.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .params import (
    NameParams,
    PoolEntry,
    PoolSpec,
    SimConfig,
    SystematicRiskModel,
    TimeGrid,
    ValidationReport,
    validate_pool,
)
from .rng import derive_stream
from .risk import RiskPath, simulate_risk_path

__all__ = [
    "BACKEND",
    "NameParams",
    "PoolEntry",
    "PoolSpec",
    "SimConfig",
    "SystematicRiskModel",
    "TimeGrid",
    "ValidationReport",
    "validate_pool",
    "derive_stream",
    "RiskPath",
    "simulate_risk_path",
    "__version__",
]
