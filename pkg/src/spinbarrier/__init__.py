"""Laser-controlled barrier decoupling of perpetually coupled spin chains."""

__version__ = "0.1.0"
