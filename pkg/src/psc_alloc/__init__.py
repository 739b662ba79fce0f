"""Joint transmission and computation resource allocation for multi-user
probabilistic semantic communication uplinks."""

from .model import (
    Allocation,
    Bundle,
    ConfigError,
    NetworkConfig,
    PiecewiseLoad,
    SolverParams,
    db_to_linear,
    dbm_to_watts,
    default_load,
    load_config,
    parse_config,
    validate,
)
from .optimizer import BeamformerPolicy, InfeasibleError, objective, run_three_stage

__all__ = [
    "Allocation", "BeamformerPolicy", "Bundle", "ConfigError", "InfeasibleError",
    "NetworkConfig", "PiecewiseLoad", "SolverParams", "db_to_linear", "dbm_to_watts",
    "default_load", "load_config", "objective", "parse_config", "run_three_stage", "validate",
]
