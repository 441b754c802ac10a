"""Inference engine: attention-based path scoring, confident answering, judging.

One model instance serves all requests through a single lock, so the HTTP
layer may accept concurrently while inference stays serialized. Everything
here is greedy and temperature-free; with a fixed model version the replies
are deterministic.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

from .config import ModelConfig, resolve_attention_layer
from .parsing import geometric_mean, parse_answer_list, parse_judge_selection

logger = logging.getLogger(__name__)

SCORING_INSTRUCTION = (
    "Based on the reasoning paths, please answer the given question. "
    "Please keep the answer as simple as possible and return all the possible answers as a list."
)

JUDGE_INSTRUCTION = (
    "You are given a question and numbered reasoning paths. "
    "Reply with the numbers of the paths that help answer the question, "
    'separated by commas (for example: 1, 3). Reply "none" if no path is relevant.'
)


@dataclass(frozen=True)
class ScoreReply:
    scores: list[float]
    chunked: bool


@dataclass(frozen=True)
class AnswerItem:
    text: str
    confidence: float


@dataclass(frozen=True)
class AnswerReply:
    answers: list[AnswerItem]
    raw_text: str


@dataclass(frozen=True)
class JudgeResult:
    selected: list[int]
    unparseable: bool
    raw_text: str


class InferenceEngine:
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        logger.info("loading model %s on %s", cfg.model_id, cfg.device)
        self.tokenizer = AutoTokenizer.from_pretrained(cfg.model_id)
        if not self.tokenizer.is_fast:
            raise ValueError("a fast tokenizer is required (offset mappings drive span scoring)")
        # eager attention so per-head weights are actually materialized
        self.model = AutoModelForCausalLM.from_pretrained(cfg.model_id, attn_implementation="eager")
        self.model.to(cfg.device)
        self.model.eval()
        if self.tokenizer.pad_token_id is None:
            self.tokenizer.pad_token = self.tokenizer.eos_token
        self.n_layers = int(self.model.config.num_hidden_layers)
        self.attention_layer = resolve_attention_layer(self.n_layers, cfg.attention_layer_override)
        self._lock = threading.Lock()

    def health(self) -> dict:
        return {
            "model": self.cfg.model_id,
            "n_layers": self.n_layers,
            "attention_layer": self.attention_layer,
        }

    # -- path scoring --------------------------------------------------------

    @staticmethod
    def _scoring_prompt(question: str, paths: list[str]) -> str:
        lines = [SCORING_INSTRUCTION, "", "Reasoning Paths:", "", "High Priority Paths:"]
        lines.extend(paths)
        lines.extend(["", "Additional Paths:", "", "Question:", question])
        return "\n".join(lines)

    def score_paths(self, question: str, paths: list[str]) -> ScoreReply:
        if not paths:
            raise ValueError("score_paths requires at least one path")
        chunks = self._chunk_paths(question, paths)
        scores: list[float] = []
        for chunk in chunks:
            scores.extend(self._score_chunk(question, chunk))
        return ScoreReply(scores=scores, chunked=len(chunks) > 1)

    def _chunk_paths(self, question: str, paths: list[str]) -> list[list[str]]:
        budget = self.cfg.max_context_tokens
        base = len(self.tokenizer(self._scoring_prompt(question, []))["input_ids"])
        chunks: list[list[str]] = [[]]
        used = base
        for path in paths:
            cost = len(self.tokenizer(path)["input_ids"]) + 1
            if chunks[-1] and used + cost > budget:
                chunks.append([])
                used = base
            chunks[-1].append(path)
            used += cost
        return chunks

    def _score_chunk(self, question: str, paths: list[str]) -> list[float]:
        prompt = self._scoring_prompt(question, paths)
        enc = self.tokenizer(
            prompt,
            return_offsets_mapping=True,
            return_tensors="pt",
            truncation=True,
            max_length=self.cfg.max_context_tokens,
        )
        offsets = enc.pop("offset_mapping")[0].tolist()
        enc = {k: v.to(self.cfg.device) for k, v in enc.items()}
        with self._lock, torch.no_grad():
            out = self.model(**enc, output_attentions=True)
        # (heads, key_len): attention mass from the final prompt position
        attn = out.attentions[self.attention_layer][0][:, -1, :]
        scores = []
        for path in paths:
            start = prompt.find(path)
            end = start + len(path)
            span = [
                i for i, (a, b) in enumerate(offsets)
                if a < end and b > start and b > a
            ]
            if start < 0 or not span:
                scores.append(0.0)
                continue
            scores.append(float(attn[:, span].mean()))
        return scores

    # -- answering -----------------------------------------------------------

    def _generate(self, prompt: str, max_new_tokens: int) -> tuple[list[int], list[float]]:
        enc = self.tokenizer(prompt, return_tensors="pt", truncation=True,
                             max_length=self.cfg.max_context_tokens)
        enc = {k: v.to(self.cfg.device) for k, v in enc.items()}
        with self._lock, torch.no_grad():
            out = self.model.generate(
                **enc,
                max_new_tokens=max_new_tokens,
                do_sample=False,
                output_scores=True,
                return_dict_in_generate=True,
                pad_token_id=self.tokenizer.pad_token_id,
            )
        prompt_len = enc["input_ids"].shape[1]
        ids = out.sequences[0][prompt_len:].tolist()
        probs = []
        for step, token_id in enumerate(ids):
            step_probs = torch.softmax(out.scores[step][0], dim=-1)
            probs.append(float(step_probs[token_id]))
        if self.tokenizer.eos_token_id is not None and self.tokenizer.eos_token_id in ids:
            cut = ids.index(self.tokenizer.eos_token_id)
            ids, probs = ids[:cut], probs[:cut]
        return ids, probs

    def _token_char_spans(self, ids: list[int]) -> tuple[str, list[tuple[int, int]]]:
        text = ""
        spans = []
        for i in range(len(ids)):
            grown = self.tokenizer.decode(ids[: i + 1], skip_special_tokens=False)
            spans.append((len(text), len(grown)))
            text = grown
        return text, spans

    def answer(self, prompt: str, max_new_tokens: int = 256) -> AnswerReply:
        ids, probs = self._generate(prompt, max_new_tokens)
        if not ids:
            return AnswerReply(answers=[], raw_text="")
        text, spans = self._token_char_spans(ids)
        parsed = parse_answer_list(text)
        if not parsed:
            fallback = text.strip()
            if not fallback:
                return AnswerReply(answers=[], raw_text=text)
            return AnswerReply(
                answers=[AnswerItem(fallback, round(geometric_mean(probs), 4))],
                raw_text=text,
            )
        answers = []
        cursor = 0
        for item in parsed:
            start = text.find(item, cursor)
            if start < 0:
                start = text.find(item)
            if start < 0:
                token_probs = probs  # parser transformed the surface form
            else:
                end = start + len(item)
                cursor = end
                token_probs = [
                    probs[i] for i, (a, b) in enumerate(spans) if a < end and b > start
                ] or probs
            answers.append(AnswerItem(item, round(geometric_mean(token_probs), 4)))
        return AnswerReply(answers=answers, raw_text=text)

    # -- judging ---------------------------------------------------------------

    def judge(self, question: str, paths: list[str]) -> JudgeResult:
        lines = [JUDGE_INSTRUCTION, "", "Question:", question, "", "Paths:"]
        lines.extend(f"{i + 1}. {p}" for i, p in enumerate(paths))
        lines.extend(["", "Relevant path numbers:"])
        ids, _probs = self._generate("\n".join(lines), max_new_tokens=32)
        text = self.tokenizer.decode(ids, skip_special_tokens=True)
        selected, unparseable = parse_judge_selection(text, len(paths))
        return JudgeResult(selected=selected, unparseable=unparseable, raw_text=text)
