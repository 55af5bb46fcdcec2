"""Deterministic simulator and evaluation harness for zero-trust policy engines."""
__version__ = "0.1.0"
