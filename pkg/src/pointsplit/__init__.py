"""Thinning, splitting and the Poisson factorization characterization."""
