"""Simulation-informed Bayesian optimization for planar biped controllers."""

__version__ = "0.1.0"
