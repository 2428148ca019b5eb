"""Multi-output quantile forecasting of PV generation."""

__version__ = "0.1.0"
