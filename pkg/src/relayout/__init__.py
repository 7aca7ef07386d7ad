"""Relation trees, salient blocks, prototype rebalancing and metrics for poster layouts."""

__version__ = "0.1.0"
