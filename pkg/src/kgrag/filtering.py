"""Two-stage path filtering: coarse score cut, then model-judge refinement.

Stage 1 keeps paths whose score clears a threshold (boundary inclusive) or
the top k by score; Stage 2 asks the adapter's judge to pick the truly
relevant subset out of the coarse survivors. Everything the coarse stage
kept but the judge rejected is preserved as the residual, which prompting
renders as lower-priority context.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .adapter import JudgeUnavailable
from .retrieval import Question, verbalize
from .scoring import ScoredPath

logger = logging.getLogger(__name__)

COARSE_MODES = ("top_k", "absolute")
JUDGE_FALLBACKS = ("keep_all", "drop_all")


@dataclass(frozen=True)
class FilterConfig:
    coarse_mode: str = "top_k"
    k: int = 50
    tau: float = 0.0
    coarse_enabled: bool = True
    fine_enabled: bool = True
    judge_fallback: str = "keep_all"

    def __post_init__(self) -> None:
        if self.coarse_mode not in COARSE_MODES:
            raise ValueError(f"coarse_mode must be one of {COARSE_MODES}, got {self.coarse_mode!r}")
        if self.coarse_mode == "top_k" and self.k < 1:
            raise ValueError(f"top_k mode needs k >= 1, got {self.k}")
        if self.coarse_mode == "absolute" and not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"absolute mode needs tau in [0,1], got {self.tau}")
        if self.judge_fallback not in JUDGE_FALLBACKS:
            raise ValueError(f"judge_fallback must be one of {JUDGE_FALLBACKS}, got {self.judge_fallback!r}")


@dataclass(frozen=True)
class FilterOutcome:
    coarse: tuple[ScoredPath, ...]
    final: tuple[ScoredPath, ...]
    residual: tuple[ScoredPath, ...]
    judge_raw: str = ""
    flags: tuple[str, ...] = ()


def coarse_filter(paths: Sequence[ScoredPath], cfg: FilterConfig) -> list[ScoredPath]:
    """Stage 1: threshold (score >= tau) or top-k cut, descending score, stable ties."""
    ranked = sorted(paths, key=lambda sp: -sp.score)  # stable: ties keep input order
    if cfg.coarse_mode == "absolute":
        return [sp for sp in ranked if sp.score >= cfg.tau]
    return ranked[: cfg.k]


def fine_filter(client, q: Question, coarse: Sequence[ScoredPath], cfg: FilterConfig) -> FilterOutcome:
    """Stage 2: one judge call selects the final subset; the rest is residual.

    Out-of-range or duplicate indices in the reply are dropped (lenient: only
    the mock's free-text mode produces them, the wire client validates).
    An unparseable reply or an unreachable judge falls back per config.
    """
    coarse = tuple(coarse)
    if not coarse:
        return FilterOutcome(coarse=(), final=(), residual=())
    try:
        reply = client.judge(q.text, [verbalize(sp.path) for sp in coarse])
    except JudgeUnavailable as exc:
        logger.warning("question %s: judge unavailable (%s), falling back to %s", q.id, exc, cfg.judge_fallback)
        return _fallback_outcome(coarse, cfg, raw=str(exc), flag="judge_unavailable")
    if reply.selected is None:
        return _fallback_outcome(coarse, cfg, raw=reply.raw, flag="judge_unparseable")
    kept = sorted({i for i in reply.selected if 0 <= i < len(coarse)})
    kept_set = set(kept)
    final = tuple(coarse[i] for i in kept)
    residual = tuple(sp for i, sp in enumerate(coarse) if i not in kept_set)
    return FilterOutcome(coarse=coarse, final=final, residual=residual, judge_raw=reply.raw)


def _fallback_outcome(coarse: tuple[ScoredPath, ...], cfg: FilterConfig, raw: str, flag: str) -> FilterOutcome:
    if cfg.judge_fallback == "keep_all":
        return FilterOutcome(coarse=coarse, final=coarse, residual=(), judge_raw=raw, flags=(flag,))
    return FilterOutcome(coarse=coarse, final=(), residual=coarse, judge_raw=raw, flags=(flag,))


def run_filter_pipeline(client, q: Question, scored: Sequence[ScoredPath], cfg: FilterConfig) -> FilterOutcome:
    """Apply whichever stages are enabled; with both off the input passes through."""
    coarse = tuple(coarse_filter(scored, cfg)) if cfg.coarse_enabled else tuple(scored)
    if cfg.fine_enabled:
        return fine_filter(client, q, coarse, cfg)
    return FilterOutcome(coarse=coarse, final=coarse, residual=())
