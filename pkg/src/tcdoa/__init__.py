"""Cramer-Rao bounds and IV-SSF estimation for temporally correlated sources."""

__version__ = "0.1.0"
