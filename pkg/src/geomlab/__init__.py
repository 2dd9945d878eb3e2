"""Projective compactness diagnostics for closed-form pseudo-Riemannian metrics."""

__version__ = "0.1.0"
