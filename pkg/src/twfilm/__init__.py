"""Bounded traveling waves of a gravity-driven thin film carrying insoluble surfactant."""

__version__ = "0.1.0"
