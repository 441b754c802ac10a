"""Tiered reasoning prompt construction, byte-reproducible.

Layout is fixed (LF newlines): instruction, the two path tiers with their
headers, then the question. High-priority paths are never dropped; when the
prompt exceeds the budget, additional paths fall off the end, lowest score
first.
"""

from __future__ import annotations

from dataclasses import dataclass

from .filtering import FilterOutcome
from .retrieval import Question, verbalize

RAG_INSTRUCTION = (
    "Based on the reasoning paths, please answer the given question. "
    "Please keep the answer as simple as possible and return all the possible answers as a list."
)
LLM_ONLY_INSTRUCTION = (
    "Please answer the given question. "
    "Please keep the answer as simple as possible and return all the possible answers as a list."
)

DEFAULT_MAX_CHARS = 8000


class EmptyQuestionError(ValueError):
    code = "empty_question"


@dataclass(frozen=True)
class PromptBundle:
    text: str
    high_priority_count: int
    additional_count: int
    truncated: bool


def _render(q: Question, high: list[str], additional: list[str]) -> str:
    lines = [RAG_INSTRUCTION, "", "Reasoning Paths:", "", "High Priority Paths:"]
    lines.extend(high)
    lines.append("")
    lines.append("Additional Paths:")
    lines.extend(additional)
    lines.extend(["", "Question:", q.text])
    return "\n".join(lines)


def build_prompt(q: Question, outcome: FilterOutcome, max_chars: int = DEFAULT_MAX_CHARS) -> PromptBundle:
    """Render the tiered prompt; drop additional paths from the end until it fits."""
    high = [verbalize(sp.path) for sp in outcome.final]
    additional = [verbalize(sp.path) for sp in outcome.residual]
    text = _render(q, high, additional)
    truncated = False
    while len(text) > max_chars and additional:
        additional.pop()  # residual is in descending score order
        truncated = True
        text = _render(q, high, additional)
    if len(text) > max_chars:
        truncated = True
    return PromptBundle(
        text=text,
        high_priority_count=len(high),
        additional_count=len(additional),
        truncated=truncated,
    )


def build_llm_only_prompt(q: Question) -> PromptBundle:
    """Retrieval-free prompt for the model's standalone answer."""
    if not q.text.strip():
        raise EmptyQuestionError(f"question {q.id!r} has empty text")
    text = "\n".join([LLM_ONLY_INSTRUCTION, "", "Question:", q.text])
    return PromptBundle(text=text, high_priority_count=0, additional_count=0, truncated=False)
