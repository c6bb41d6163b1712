"""Synthesizer for optimal pushdown decompositions of fold-style pipelines."""

__version__ = "0.1.0"
