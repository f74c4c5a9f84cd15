"""Heat content and heat loss of open sets in R^m."""

__version__ = "0.1.0"
