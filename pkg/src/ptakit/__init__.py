"""Modular pointer analysis over a miniature pointer IR."""

__version__ = "0.1.0"
