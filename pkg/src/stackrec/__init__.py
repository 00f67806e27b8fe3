"""Location-based stacks recommender middleware and its log analytics toolkit."""

__version__ = "0.1.0"
