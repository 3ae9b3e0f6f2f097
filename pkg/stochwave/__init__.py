"""Stochastic travelling waves: simulation, freezing and speed estimation."""
