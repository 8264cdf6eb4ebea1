"""Receiver-centric semantic communication over annotated surveillance clips."""

__version__ = "0.1.0"
