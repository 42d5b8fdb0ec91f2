"""Single-ion addressing with two counter-propagating frequency combs."""

__version__ = "0.1.0"
