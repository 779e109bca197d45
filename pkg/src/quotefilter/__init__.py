"""Bayesian learning of a latent efficient price from quotes and trades.

A numerical laboratory for intensity-driven order flow: simulate the
hidden price and the aggressive orders it triggers, filter it on a grid
or with the small-spread Gaussian approximation, feed the posterior back
into the quotes, and measure the market impact of meta-orders.
"""

from . import _backend
from .errors import (
    ConfigError,
    DomainError,
    EnvelopeViolation,
    IoError,
    NoConvergence,
    NonFiniteIntegral,
    PolicyStateMismatch,
    QuoteFilterError,
    Underflow,
    ZeroMass,
)
from .model import (
    ExpIntensity,
    GaussianPrior,
    IntensityClip,
    PriceModel,
    Quotes,
    Side,
    Source,
    TradeEvent,
    characteristic_time,
    evaluate,
    property_a_residual,
    property_b_residual,
)
from .flow import (
    BrownianSampler,
    MetaOrderSchedule,
    PricePath,
    merge_events,
    meta_events,
    replica_rng,
    simulate_price,
    simulate_trades,
)
from .grid import (
    FilterDiagnostics,
    GridDensity,
    GridFilter,
    QuoteHistory,
    apply_trade,
    asymptotic_between_trades,
    closed_form_fixed_price,
    default_grid,
    diagnostics,
    normalize,
    step_continuous,
)
from .gaussian import (
    GaussianState,
    average_impact,
    evolve_mean,
    impact_no_info,
    stationary_variance,
    variance_at,
)
from .maker import (
    ArgmaxMMState,
    PolicyKind,
    QuotePolicy,
    argmax_jump,
    impact_recursion,
    quotes_from_posterior,
)

__version__ = "0.1.0"

backend = _backend.name

__all__ = [
    "ArgmaxMMState",
    "BrownianSampler",
    "ConfigError",
    "DomainError",
    "EnvelopeViolation",
    "ExpIntensity",
    "FilterDiagnostics",
    "GaussianPrior",
    "GaussianState",
    "GridDensity",
    "GridFilter",
    "IntensityClip",
    "IoError",
    "MetaOrderSchedule",
    "NoConvergence",
    "NonFiniteIntegral",
    "PolicyKind",
    "PolicyStateMismatch",
    "PriceModel",
    "PricePath",
    "QuoteFilterError",
    "QuoteHistory",
    "QuotePolicy",
    "Quotes",
    "Side",
    "Source",
    "TradeEvent",
    "Underflow",
    "ZeroMass",
    "apply_trade",
    "argmax_jump",
    "asymptotic_between_trades",
    "average_impact",
    "backend",
    "characteristic_time",
    "closed_form_fixed_price",
    "default_grid",
    "diagnostics",
    "evaluate",
    "evolve_mean",
    "impact_no_info",
    "impact_recursion",
    "merge_events",
    "meta_events",
    "normalize",
    "property_a_residual",
    "property_b_residual",
    "quotes_from_posterior",
    "replica_rng",
    "simulate_price",
    "simulate_trades",
    "stationary_variance",
    "step_continuous",
    "variance_at",
]
