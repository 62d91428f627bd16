"""Fully passive decoy-state BB84: transmitter statistics, decoy-state bounds and key rates."""

__version__ = "0.1.0"
