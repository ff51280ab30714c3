"""Bagged mean-field variational Bayes."""
__version__ = "0.1.0"
