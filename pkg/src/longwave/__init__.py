"""Numerical laboratory for long-wave limits of the ion Vlasov-Poisson system."""

__version__ = "0.1.0"
