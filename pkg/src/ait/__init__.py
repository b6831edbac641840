"""Agent trace capture, dataset curation, and repeatable evaluation."""

__version__ = "0.1.0"
