"""Hard instances for quadrature of SDE marginals with bounded smooth coefficients."""

__version__ = "0.1.0"
