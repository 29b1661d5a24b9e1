"""Certified construction of free, profinitely dense subgroups of SL_n(Z)."""

__version__ = "0.1.0"
