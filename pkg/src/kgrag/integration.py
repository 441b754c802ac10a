"""Confidence-based answer integration: filter both answer sets, then merge.

Answers retrieved with graph context and answers from the model alone are
each filtered by a confidence threshold (boundary inclusive), then combined
as an ordered union with graph-context answers first. An empty union falls
back to an unfiltered set so the pipeline never silently returns nothing.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

from .adapter import AnswerCandidate, AnswerUnavailable, IntegrationUnavailable
from .prompting import PromptBundle, build_llm_only_prompt
from .retrieval import Question
from .text import normalize

logger = logging.getLogger(__name__)

FALLBACKS = ("graphrag_unfiltered", "llm_unfiltered", "empty")


@dataclass(frozen=True)
class AnswerSet:
    answers: tuple[AnswerCandidate, ...]
    origin: str  # "graphrag" | "llm_only" | "combined"

    @classmethod
    def from_candidates(cls, candidates: Sequence[AnswerCandidate], origin: str) -> "AnswerSet":
        """Dedup by normalized text: first position wins, highest confidence kept."""
        slots: dict[str, int] = {}
        out: list[AnswerCandidate] = []
        for cand in candidates:
            key = normalize(cand.text)
            if not key:
                continue
            if key in slots:
                i = slots[key]
                if cand.confidence > out[i].confidence:
                    out[i] = AnswerCandidate(out[i].text, cand.confidence)
            else:
                slots[key] = len(out)
                out.append(cand)
        return cls(answers=tuple(out), origin=origin)

    def texts(self) -> list[str]:
        return [a.text for a in self.answers]

    def __len__(self) -> int:
        return len(self.answers)


@dataclass(frozen=True)
class IntegrationConfig:
    tau_g: float = 0.5
    tau_l: float = 1.0
    fallback: str = "graphrag_unfiltered"

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_g <= 1.0:
            raise ValueError(f"tau_g must be in [0,1], got {self.tau_g}")
        if not 0.0 <= self.tau_l <= 1.0:
            raise ValueError(f"tau_l must be in [0,1], got {self.tau_l}")
        if self.fallback not in FALLBACKS:
            raise ValueError(f"fallback must be one of {FALLBACKS}, got {self.fallback!r}")


def filter_answers(s: AnswerSet, tau: float) -> AnswerSet:
    """Keep answers whose confidence clears tau (boundary inclusive), order preserved."""
    return AnswerSet(
        answers=tuple(a for a in s.answers if a.confidence >= tau),
        origin=s.origin,
    )


def combine(
    ag: AnswerSet,
    al: AnswerSet,
    cfg: IntegrationConfig,
    raw_graphrag: AnswerSet | None = None,
    raw_llm: AnswerSet | None = None,
) -> AnswerSet:
    """Ordered union, graph-context answers first, normalized-text dedup.

    The raw (pre-filter) sets supply the fallback material when the union is
    empty; the configured side is preferred, the other used if that side's
    call never produced a set.
    """
    merged = AnswerSet.from_candidates(tuple(ag.answers) + tuple(al.answers), origin="combined")
    if merged.answers:
        return merged
    if cfg.fallback == "empty":
        return merged
    preferred, other = (raw_graphrag, raw_llm) if cfg.fallback == "graphrag_unfiltered" else (raw_llm, raw_graphrag)
    source = preferred if preferred is not None and preferred.answers else other
    if source is None:
        return merged
    return AnswerSet.from_candidates(source.answers, origin="combined")


@dataclass(frozen=True)
class IntegrationRecord:
    """Everything the integration step saw and decided, for the audit trail."""

    question_id: str
    raw_graphrag: AnswerSet
    raw_llm: AnswerSet
    filtered_graphrag: AnswerSet
    filtered_llm: AnswerSet
    final: AnswerSet
    flags: tuple[str, ...] = ()
    latencies: dict = field(default_factory=dict)

    def to_audit(self, cfg: IntegrationConfig) -> dict:
        def dump(s: AnswerSet) -> list[dict]:
            return [{"text": a.text, "confidence": a.confidence} for a in s.answers]

        return {
            "raw_graphrag": dump(self.raw_graphrag),
            "raw_llm_only": dump(self.raw_llm),
            "filtered_graphrag": dump(self.filtered_graphrag),
            "filtered_llm_only": dump(self.filtered_llm),
            "final": dump(self.final),
            "flags": list(self.flags),
            "latencies_s": self.latencies,
            "tau_g": cfg.tau_g,
            "tau_l": cfg.tau_l,
            "fallback": cfg.fallback,
        }


def integrate(client, q: Question, rag_prompt: PromptBundle, cfg: IntegrationConfig) -> IntegrationRecord:
    """Ask for both answer sets, filter each, and combine.

    One failed answer call degrades to the surviving side (flagged
    partial_integration); both failing raises IntegrationUnavailable.
    """
    flags: list[str] = []
    latencies: dict[str, float] = {}
    empty_g = AnswerSet((), "graphrag")
    empty_l = AnswerSet((), "llm_only")

    def ask(prompt_text: str, origin: str) -> AnswerSet | None:
        start = time.monotonic()
        try:
            reply = client.answer(prompt_text)
        except AnswerUnavailable as exc:
            logger.warning("question %s: %s answer call failed: %s", q.id, origin, exc)
            return None
        finally:
            latencies[origin] = round(time.monotonic() - start, 6)
        return AnswerSet.from_candidates(reply.answers, origin=origin)

    raw_g = ask(rag_prompt.text, "graphrag")
    raw_l = ask(build_llm_only_prompt(q).text, "llm_only")
    if raw_g is None and raw_l is None:
        raise IntegrationUnavailable(f"question {q.id!r}: both answer calls failed")
    if raw_g is None or raw_l is None:
        flags.append("partial_integration")

    filtered_g = filter_answers(raw_g, cfg.tau_g) if raw_g is not None else empty_g
    filtered_l = filter_answers(raw_l, cfg.tau_l) if raw_l is not None else empty_l
    final = combine(filtered_g, filtered_l, cfg, raw_graphrag=raw_g, raw_llm=raw_l)
    return IntegrationRecord(
        question_id=q.id,
        raw_graphrag=raw_g if raw_g is not None else empty_g,
        raw_llm=raw_l if raw_l is not None else empty_l,
        filtered_graphrag=filtered_g,
        filtered_llm=filtered_l,
        final=final,
        flags=tuple(flags),
        latencies=latencies,
    )
