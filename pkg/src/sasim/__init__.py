"""Actuated-corridor traffic simulator with real-time green prediction and speed advisory."""

__version__ = "0.1.0"
