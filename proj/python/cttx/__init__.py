"""Continuous-time transfer entropy toolkit."""

import json

from ._core import (
    AbsoluteContinuityError,
    ConfigError,
    ContractError,
    DomainError,
    Error,
    EstimationError,
    GridError,
    ModelError,
    NumericalError,
    ParameterError,
    __version__,
    analytic_limit,
    converge_lagged_poisson,
    jump_model_names,
    kl_divergence,
    per_step_kl,
    schreiber_te,
    single_event_step_kl,
    tau_s_limit,
    tau_s_schedule,
)
from . import _core


def ept_monte_carlo(model, params=None, t0=0.0, T=1.0, n_paths=1000, seed=1):
    """Girsanov Monte Carlo EPT over [t0, T) for a registered jump model."""
    return _core.ept_monte_carlo(model, json.dumps(params or {}), t0, T, n_paths, seed)


def run(command, config, seed=None, format=None):
    """Run a CLI command in-process on a config dict; returns (artifact, summary)."""
    return _core.run_command(command, json.dumps(config), seed, format)
