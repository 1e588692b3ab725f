"""Diff risk scoring toolkit: parsing, metrics, scoring, gating, service."""

__version__ = "0.1.0"
