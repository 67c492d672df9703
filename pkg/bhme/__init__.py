"""Bayesian hierarchical mixtures of experts trained by variational inference."""

__version__ = "0.1.0"
