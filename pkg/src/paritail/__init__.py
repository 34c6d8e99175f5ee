"""Parimutuel bandwidth market for peer-to-peer file serving: payouts,
equilibrium solvers, adaptive-market simulation and herding dynamics."""

__version__ = "0.1.0"
