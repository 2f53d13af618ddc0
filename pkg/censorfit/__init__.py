"""Weibull competing-risks inference under adaptive progressive Type-II censoring."""

__version__ = "0.1.0"
