"""Convex relaxations of co-clustering, max-norm factorization and asymmetric LSH."""

__version__ = "0.1.0"
