"""Shared ambient layer: data model, configuration, logging, errors and report models."""

__version__ = "0.1.0"
