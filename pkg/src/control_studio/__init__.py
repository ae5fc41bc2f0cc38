"""Sparse human-in-the-loop prosody control: models, data, training,
evaluation harness, and prediction service."""

__version__ = "0.1.0"
