"""Offline dataset converters producing EPB epoch files.

The output format is the EPB v1 wire contract of the decoding toolkit;
this package writes those bytes directly and never imports the toolkit.
"""

__version__ = "0.1.0"


class ConversionError(Exception):
    """The source data cannot be converted (structural problem)."""


class RetryableFetchError(ConversionError):
    """A remote dataset fetch failed; retrying may succeed."""
