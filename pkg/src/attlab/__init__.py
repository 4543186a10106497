"""Numerical laboratory for bosonic attenuator channels in truncated Fock space."""

__version__ = "0.1.0"
