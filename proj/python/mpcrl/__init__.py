"""Safe policy-gradient learning with a relaxed interior-point MPC policy.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._mpcrl import (
    ExperimentConfig,
    ScenarioPolicy,
    config_for_case,
    lqr_gain,
    lstd_fit,
    membership_check,
    parse_config_file,
    run_experiment,
)

__all__ = [
    "ExperimentConfig",
    "ScenarioPolicy",
    "config_for_case",
    "lqr_gain",
    "lstd_fit",
    "membership_check",
    "parse_config_file",
    "run_experiment",
]
