"""Numerical laboratory for nonlocal functionals that characterize constant functions."""

__version__ = "0.1.0"
