"""Conductance-based neuron circuits and their discrete-event abstractions."""

__version__ = "0.1.0"
