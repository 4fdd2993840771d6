"""Evolving readable rule-based policies for the game 2048."""

__version__ = "0.1.0"
