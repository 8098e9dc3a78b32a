"""Composable finite-key rate calculator for a three-state decoy QKD protocol
with imperfectly encoded states and intensity-fluctuating light sources.

The package is organised bottom-up:

- ``concentration``: the four tail bounds every estimator rests on.
- ``qubit_model``: source characterisation (Bloch vectors, filtered states,
  basis-mismatch transmission coefficients).
- ``channel``: lossy-channel click statistics used to generate expected or
  sampled detection counts.
- ``decoy``: vacuum / single-photon count bounds from multi-intensity data.
- ``phase_error``: upper bound on the phase-error count of the virtual
  protocol, with a reduced closed form for the symmetric source.
- ``key_length``: epsilon bookkeeping and the extractable key-length formula.
- ``pipeline``: one-call rate evaluation wiring the stages together.
- ``optimize``: rate maximisation over source parameters.
- ``validate``: Monte-Carlo and algebraic self-checks.
- ``cli``: command-line front end (sweeps, self-validation, optimisation).
"""

from .budget import EpsilonBudget
from .channel import (
    ChannelConfig,
    ChannelModel,
    expected_counts,
    sample_counts,
)
from .concentration import (
    azuma_dev,
    best_mean_bound,
    chernoff_devs,
    hoeffding_dev,
    mult_chernoff_devs,
)
from .config import ConfigError, RunConfig, load_config
from .decoy import (
    CellBounds,
    DecoyBound,
    IntensitySet,
    ObservedCounts,
    decoy_cell_bounds,
    m0_lower_exact,
    m0_lower_fluct,
    m1_lower_exact,
    m1_lower_fluct,
)
from .key_length import (
    KeyRateResult,
    binary_entropy,
    eph_threshold,
    key_length,
    lambda_ec,
)
from .optimize import OptimizationResult, SearchSpace, optimize_rate
from .phase_error import (
    PhaseErrorBound,
    n_ph_appendixE,
    n_ph_upper_general,
)
from .pipeline import ProtocolParams, build_source_model, evaluate_rate
from .validate import run_validation

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "EpsilonBudget",
    "ChannelConfig",
    "ChannelModel",
    "expected_counts",
    "sample_counts",
    "azuma_dev",
    "best_mean_bound",
    "chernoff_devs",
    "hoeffding_dev",
    "mult_chernoff_devs",
    "ConfigError",
    "RunConfig",
    "load_config",
    "CellBounds",
    "DecoyBound",
    "IntensitySet",
    "ObservedCounts",
    "decoy_cell_bounds",
    "m0_lower_exact",
    "m0_lower_fluct",
    "m1_lower_exact",
    "m1_lower_fluct",
    "KeyRateResult",
    "binary_entropy",
    "eph_threshold",
    "key_length",
    "lambda_ec",
    "OptimizationResult",
    "SearchSpace",
    "optimize_rate",
    "PhaseErrorBound",
    "n_ph_appendixE",
    "n_ph_upper_general",
    "ProtocolParams",
    "build_source_model",
    "evaluate_rate",
    "run_validation",
]
