"""Voltage rise from rooftop PV: feeder simulation and beta analytics."""
from .analysis import (
    GaussianKDE,
    analyze_dataset,
    daily_beta_series,
    entropy_bits,
    fit_site_beta,
    hourly_beta_series,
    kde,
    map_estimate,
    summarize_betas,
)
from .feeder import default_config, feeder_voltages, simulate
from .model import (
    BetaFit,
    BetaSeries,
    BetaSummary,
    Dataset,
    Density,
    FeederConfig,
    MeterSample,
    PvSiteSpec,
    SharedImpedanceMatrix,
    to_per_unit,
    validate_sample,
)
from .profile import daily_energy_per_capacity, fit_irradiance_slope
from .regression import OLSRegressor, PLS1Regressor, injection_filter, ols_fit, pls1_fit

__version__ = "0.1.0"
