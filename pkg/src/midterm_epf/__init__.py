"""Mid- and long-term electricity price forecasting with fundamentally constrained elastic nets."""

__version__ = "0.1.0"
