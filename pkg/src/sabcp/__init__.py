"""State-adaptive conformal prediction intervals for online streams.

The core idea: keep two empirical views of the nonconformity scores, a
recency-discounted temporal one and a state-conditional spatial one, gate
them by accumulated kernel evidence, mix in a decaying uniform prior, and
read the interval margin off the mixture by bisection. Baselines, a GARCH
volatility base, metrics, and a deterministic benchmark harness round out
the package.
"""

from .baselines import AciPredictor, AgAciPredictor, BcpPredictor, DtAciPredictor
from .core import (
    ConfigError,
    DataError,
    IntervalForecast,
    Observation,
    ProtocolError,
    SabcpConfig,
    nonconformity,
    stream_step,
    validate_config,
)
from .data import ReturnSeries, StateBuilder, SyntheticSpec, VolRegimeSpec, load_prices
from .engine import (
    MixtureQuery,
    QuantileEngine,
    SabcpPredictor,
    mixture_cdf,
    prior_weight,
    solve_quantile,
    spatial_proportion,
)
from .garch import GarchModel, GarchState, garch_init, garch_step
from .metrics import RunReport, StepRecord, aggregate, high_vol_mask, winkler
from .spatial import (
    OnlineMoments,
    SpatialArchive,
    bandwidth,
    kernel_weight,
    spatial_cdf,
    spatial_evidence,
    welford_update,
)
from .temporal import TemporalArchive, temporal_cdf, temporal_weight
from .theory import RiskParams, mixture_mse, optimal_k

__version__ = "0.1.0"

__all__ = [
    "AciPredictor",
    "AgAciPredictor",
    "BcpPredictor",
    "ConfigError",
    "DataError",
    "DtAciPredictor",
    "GarchModel",
    "GarchState",
    "IntervalForecast",
    "MixtureQuery",
    "Observation",
    "OnlineMoments",
    "ProtocolError",
    "QuantileEngine",
    "ReturnSeries",
    "RiskParams",
    "RunReport",
    "SabcpConfig",
    "SabcpPredictor",
    "SpatialArchive",
    "StateBuilder",
    "StepRecord",
    "SyntheticSpec",
    "TemporalArchive",
    "VolRegimeSpec",
    "aggregate",
    "bandwidth",
    "garch_init",
    "garch_step",
    "high_vol_mask",
    "kernel_weight",
    "load_prices",
    "mixture_cdf",
    "mixture_mse",
    "nonconformity",
    "optimal_k",
    "prior_weight",
    "solve_quantile",
    "spatial_cdf",
    "spatial_evidence",
    "spatial_proportion",
    "stream_step",
    "temporal_cdf",
    "temporal_weight",
    "validate_config",
    "welford_update",
    "winkler",
]
