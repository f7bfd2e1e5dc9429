"""Exact, contour, Fredholm and Monte Carlo tools for the (q, mu, nu)-Boson process and TASEP."""

__version__ = "1.0.0"
