"""Jacobi log-gas toolkit: Gibbs sampler, equilibrium measure and outlier large deviations."""

__version__ = "0.1.0"
