"""Numerical laboratory for composition-operator universality near fixed points."""

__version__ = "0.1.0"
