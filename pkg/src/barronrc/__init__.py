"""Random-feature reservoir approximation of Barron-type functionals."""

__version__ = "0.1.0"
