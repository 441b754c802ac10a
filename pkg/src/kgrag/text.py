"""Text normalization and tokenization shared across scoring, integration and evaluation.

Answer matching is exact after normalization; the same rules must be applied
everywhere answers are compared, or integration and evaluation drift apart.
"""

import re

_WS = re.compile(r"\s+")
_TOKEN = re.compile(r"[a-z0-9]+")


def normalize(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace to single spaces."""
    return _WS.sub(" ", text.strip().lower())


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; everything else is a delimiter."""
    return _TOKEN.findall(text.lower())
