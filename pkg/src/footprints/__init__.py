"""Finite-model workbench for footprints of local functions on separation algebras."""

__version__ = "0.1.0"
