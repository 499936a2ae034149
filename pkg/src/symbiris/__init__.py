"""Transmit-power minimization for RIS-assisted MIMO symbiotic radio."""

__version__ = "0.1.0"
