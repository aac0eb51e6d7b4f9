"""Conversational prescriptive-analytics agent for tabular datasets."""

__version__ = "0.1.0"
