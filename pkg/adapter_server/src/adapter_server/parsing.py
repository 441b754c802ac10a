"""Generation post-processing: answer-list parsing, judge parsing, confidence math."""

from __future__ import annotations

import json
import math
import re

_BULLET = re.compile(r"^(?:[-*•]|\d+[.)])\s+(.*)$")
_INT = re.compile(r"\d+")
_NONE = re.compile(r"\bnone\b", re.IGNORECASE)


def geometric_mean(probs: list[float]) -> float:
    """Geometric mean of token probabilities, clamped into [0,1]; empty -> 0."""
    if not probs:
        return 0.0
    logs = [math.log(max(min(p, 1.0), 1e-12)) for p in probs]
    return min(max(math.exp(sum(logs) / len(logs)), 0.0), 1.0)


def parse_answer_list(text: str) -> list[str]:
    """Extract list items from a generation; empty means unparseable.

    Accepted shapes, in order: a JSON array, bullet or numbered lines, and a
    single comma-separated line.
    """
    text = text.strip()
    if not text:
        return []
    try:
        data = json.loads(text)
        if isinstance(data, list):
            return [str(x).strip() for x in data if str(x).strip()]
    except json.JSONDecodeError:
        pass
    items = []
    for line in text.splitlines():
        m = _BULLET.match(line.strip())
        if m and m.group(1).strip():
            items.append(m.group(1).strip())
    if items:
        return items
    if "\n" not in text and "," in text:
        return [part.strip() for part in text.split(",") if part.strip()]
    return []


def parse_judge_selection(text: str, n_paths: int) -> tuple[list[int], bool]:
    """Map a judge generation to 0-indexed selected paths.

    The prompt numbers paths from 1; models count from 1, programs from 0.
    Out-of-range numbers are dropped and duplicates collapsed so the wire
    reply is always a strictly increasing in-range list. Returns the
    selection plus an unparseable flag ("none" is a valid empty selection,
    integer-free garbage is not).
    """
    if _NONE.search(text):
        return [], False
    ints = [int(m) for m in _INT.findall(text)]
    if not ints:
        return [], True
    return sorted({i - 1 for i in ints if 1 <= i <= n_paths}), False
