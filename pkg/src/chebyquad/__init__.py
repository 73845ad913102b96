"""Equal-weight quadrature construction and local cubature toolkit."""

__version__ = "0.1.0"
