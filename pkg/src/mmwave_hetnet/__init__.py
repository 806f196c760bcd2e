"""Load balancing and rate coverage in two-tier mmWave heterogeneous networks."""

from .analysis import (
    AssociationReport,
    CoverageResult,
    Scenario,
    SinrQuery,
    association_probabilities,
    rate_coverage,
    scenario_coverage,
)
from .config import dump_config, load_config
from .model import FadingModel, NetworkConfig, Tier, TierParams, table1_config
from .optimizer import SearchSpec, optimize_bias, sweep

__version__ = "0.1.0"
