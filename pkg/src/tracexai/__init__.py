"""Explainability toolkit for static classifiers and agentic execution traces."""

__version__ = "0.1.0"
