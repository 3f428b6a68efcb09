"""Portfolio construction from multiple ranking views of asset returns."""

__version__ = "0.1.0"
