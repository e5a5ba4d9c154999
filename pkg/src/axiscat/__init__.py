"""Acoustic scattering from doubly-periodic arrays of axisymmetric obstacles."""

__version__ = "0.1.0"
