"""Deceptive wireless beamforming (DWB) simulator for multi-antenna OFDM links."""

from dwbsim.version import __version__

__all__ = ["__version__"]
