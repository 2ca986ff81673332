"""Forecast daily case counts from search-interest series."""
__version__ = "0.1.0"
