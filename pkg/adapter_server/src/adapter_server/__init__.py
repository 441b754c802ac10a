"""Model adapter service: wraps a causal LM behind the QA pipeline's wire protocol."""

__version__ = "0.1.0"
