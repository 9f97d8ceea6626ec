"""Krylov and SVD regularization for discrete ill-posed least-squares problems."""

__version__ = "0.1.0"
