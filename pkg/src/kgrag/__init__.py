"""Knowledge-graph QA pipeline with two-stage path filtering and answer integration."""

__version__ = "0.1.0"
