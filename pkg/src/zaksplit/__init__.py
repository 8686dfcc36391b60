"""Lie-Trotter splitting with Fourier collocation for the Zakharov system on T^d."""

__version__ = "0.1.0"
