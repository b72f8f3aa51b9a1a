"""Fake-news information processes, voter-category filters and election simulations."""

__version__ = "0.1.0"
