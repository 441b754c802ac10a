"""Client for the model-adapter wire protocol, plus an in-process deterministic mock.

The wire protocol (JSON over HTTP, UTF-8):

    GET  /v1/health       -> {"model": str, "n_layers": int, "attention_layer": int}
    POST /v1/score_paths  {"question": str, "paths": [str]} -> {"scores": [number]}
    POST /v1/judge        {"question": str, "paths": [str]} -> {"selected": [int]}
    POST /v1/answer       {"prompt": str, "max_new_tokens": int} ->
                          {"answers": [{"text": str, "confidence": number}], "raw_text": str}

Errors come back as non-2xx with {"error": str}; auth is an optional bearer
token. The client validates every reply strictly and never repairs it: a
count mismatch, non-finite score, out-of-range confidence or bad index list
is a ProtocolViolation, not something to paper over. Lenient handling of
sloppy judge output belongs above the wire (fine filtering) and only applies
to the mock's free-text mode.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterable, Mapping, Sequence

import requests

from .text import tokenize

logger = logging.getLogger(__name__)

_INT = re.compile(r"-?\d+")


class AdapterError(Exception):
    """Base class for adapter failures."""

    code = "adapter_error"


class ProtocolViolation(AdapterError):
    """The adapter replied with data violating the wire contract."""

    code = "protocol_violation"


class AdapterUnavailable(AdapterError):
    """An endpoint stayed unreachable or failing after all retries."""

    code = "adapter_unavailable"


class ScorerUnavailable(AdapterUnavailable):
    code = "scorer_unavailable"


class JudgeUnavailable(AdapterUnavailable):
    code = "judge_unavailable"


class AnswerUnavailable(AdapterUnavailable):
    code = "answer_unavailable"


class IntegrationUnavailable(AdapterError):
    """Both answer calls of an integration step failed."""

    code = "integration_unavailable"


class MockFixtureError(ValueError):
    """A mock fixture file violates its schema; the message names the entry."""


@dataclass(frozen=True)
class AnswerCandidate:
    """One answer string with the model's confidence in it."""

    text: str
    confidence: float


@dataclass(frozen=True)
class JudgeReply:
    """Judge selection; selected is None when the reply was unparseable."""

    selected: tuple[int, ...] | None
    raw: str


@dataclass(frozen=True)
class AnswerReply:
    answers: tuple[AnswerCandidate, ...]
    raw_text: str


@dataclass(frozen=True)
class AdapterEndpointConfig:
    base_url: str
    timeout: float = 120.0
    retries: int = 2
    auth_token: str | None = None
    backoff_base: float = 1.0  # seconds; doubled per retry, full jitter

    def __post_init__(self) -> None:
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")


def _check_finite_score(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolViolation(f"{where}: score must be a number, got {value!r}")
    score = float(value)
    if not math.isfinite(score) or score < 0:
        raise ProtocolViolation(f"{where}: score must be finite and >= 0, got {score!r}")
    return score


def _check_confidence(value: object, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolViolation(f"{where}: confidence must be a number, got {value!r}")
    conf = float(value)
    if not math.isfinite(conf) or not 0.0 <= conf <= 1.0:
        raise ProtocolViolation(f"{where}: confidence must be in [0,1], got {conf!r}")
    return conf


def validate_scores(scores: object, n_paths: int, where: str = "score_paths") -> list[float]:
    if not isinstance(scores, list):
        raise ProtocolViolation(f"{where}: scores must be a list")
    if len(scores) != n_paths:
        raise ProtocolViolation(f"{where}: got {len(scores)} scores for {n_paths} paths")
    return [_check_finite_score(s, f"{where}[{i}]") for i, s in enumerate(scores)]


def validate_selection(selected: object, n_paths: int, where: str = "judge") -> tuple[int, ...]:
    if not isinstance(selected, list):
        raise ProtocolViolation(f"{where}: selected must be a list")
    out: list[int] = []
    for i, v in enumerate(selected):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ProtocolViolation(f"{where}[{i}]: index must be an integer, got {v!r}")
        if not 0 <= v < n_paths:
            raise ProtocolViolation(f"{where}[{i}]: index {v} out of range for {n_paths} paths")
        if out and v <= out[-1]:
            raise ProtocolViolation(f"{where}: indices must be strictly increasing, got {selected}")
        out.append(v)
    return tuple(out)


def validate_answers(answers: object, where: str = "answer") -> tuple[AnswerCandidate, ...]:
    if not isinstance(answers, list):
        raise ProtocolViolation(f"{where}: answers must be a list")
    out: list[AnswerCandidate] = []
    for i, item in enumerate(answers):
        if not isinstance(item, Mapping) or "text" not in item or "confidence" not in item:
            raise ProtocolViolation(f"{where}[{i}]: expected {{text, confidence}}")
        text = item["text"]
        if not isinstance(text, str):
            raise ProtocolViolation(f"{where}[{i}]: text must be a string")
        conf = _check_confidence(item["confidence"], f"{where}[{i}]")
        text = text.strip()
        if text:  # empty-after-trim answers are dropped, not errors
            out.append(AnswerCandidate(text=text, confidence=conf))
    return tuple(out)


class AdapterClient:
    """HTTP client with retry/backoff; one session per thread, shareable handle."""

    def __init__(self, cfg: AdapterEndpointConfig):
        self.cfg = cfg
        self._local = threading.local()

    def _session(self) -> requests.Session:
        sess = getattr(self._local, "session", None)
        if sess is None:
            sess = requests.Session()
            if self.cfg.auth_token:
                sess.headers["Authorization"] = f"Bearer {self.cfg.auth_token}"
            self._local.session = sess
        return sess

    def _request(self, method: str, endpoint: str, payload: dict | None, err_cls: type[AdapterUnavailable]) -> tuple[dict, str]:
        url = self.cfg.base_url.rstrip("/") + endpoint
        attempts = self.cfg.retries + 1
        last_error = ""
        for attempt in range(attempts):
            if attempt:
                delay = self.cfg.backoff_base * (2 ** (attempt - 1))
                time.sleep(random.uniform(0, delay))
            try:
                if method == "GET":
                    resp = self._session().get(url, timeout=self.cfg.timeout)
                else:
                    resp = self._session().post(url, json=payload, timeout=self.cfg.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                logger.warning("adapter %s attempt %d/%d failed: %s", endpoint, attempt + 1, attempts, exc)
                continue
            if 500 <= resp.status_code < 600:
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                logger.warning("adapter %s attempt %d/%d failed: %s", endpoint, attempt + 1, attempts, last_error)
                continue
            if resp.status_code != 200:
                raise err_cls(f"{endpoint}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json(), resp.text
            except ValueError:
                raise ProtocolViolation(f"{endpoint}: reply is not JSON") from None
        raise err_cls(f"{endpoint}: unavailable after {attempts} attempts: {last_error}")

    def health(self) -> dict:
        body, _ = self._request("GET", "/v1/health", None, AdapterUnavailable)
        return body

    def score_paths(self, question: str, paths: Sequence[str]) -> list[float]:
        if not paths:
            raise ValueError("score_paths requires at least one path")
        body, _ = self._request(
            "POST", "/v1/score_paths", {"question": question, "paths": list(paths)}, ScorerUnavailable
        )
        return validate_scores(body.get("scores"), len(paths))

    def judge(self, question: str, paths: Sequence[str]) -> JudgeReply:
        body, raw = self._request(
            "POST", "/v1/judge", {"question": question, "paths": list(paths)}, JudgeUnavailable
        )
        return JudgeReply(selected=validate_selection(body.get("selected"), len(paths)), raw=raw)

    def answer(self, prompt: str, max_new_tokens: int = 256) -> AnswerReply:
        body, _ = self._request(
            "POST", "/v1/answer", {"prompt": prompt, "max_new_tokens": max_new_tokens}, AnswerUnavailable
        )
        answers = validate_answers(body.get("answers"))
        raw_text = body.get("raw_text", "")
        if not isinstance(raw_text, str):
            raise ProtocolViolation("answer: raw_text must be a string")
        return AnswerReply(answers=answers, raw_text=raw_text)


# -- deterministic mock ------------------------------------------------------


@dataclass
class QuestionScript:
    """Scripted replies for one question, keyed by its exact text."""

    question: str
    score_paths: dict[str, float] | list[float] | None = None
    judge: list[str] | str | None = None
    answers: dict[str, list[AnswerCandidate]] = field(default_factory=dict)  # "rag" / "llm_only"


@dataclass
class MockFixture:
    scripts: dict[str, QuestionScript]  # question id -> script

    @classmethod
    def from_dict(cls, data: Mapping) -> "MockFixture":
        scripts: dict[str, QuestionScript] = {}
        questions = data.get("questions", {})
        if not isinstance(questions, Mapping):
            raise MockFixtureError('fixture root must contain an object under "questions"')
        for qid, entry in questions.items():
            where = f"questions.{qid}"
            if not isinstance(entry, Mapping) or "question" not in entry:
                raise MockFixtureError(f'{where}: entry must be an object with a "question" text')
            raw_scores = entry.get("score_paths")
            scores: dict[str, float] | list[float] | None = None
            if isinstance(raw_scores, Mapping):
                scores = {}
                for text, val in raw_scores.items():
                    scores[text] = cls._check_score(val, f"{where}.score_paths[{text!r}]")
            elif isinstance(raw_scores, list):
                scores = [cls._check_score(v, f"{where}.score_paths[{i}]") for i, v in enumerate(raw_scores)]
            elif raw_scores is not None:
                raise MockFixtureError(f"{where}.score_paths: must be a list or an object")
            judge = entry.get("judge")
            if judge is not None and not isinstance(judge, (list, str)):
                raise MockFixtureError(f"{where}.judge: must be a list of path texts or a free-text string")
            answers: dict[str, list[AnswerCandidate]] = {}
            for kind, items in (entry.get("answers") or {}).items():
                if kind not in ("rag", "llm_only"):
                    raise MockFixtureError(f"{where}.answers.{kind}: kind must be rag or llm_only")
                cands = []
                for i, item in enumerate(items):
                    spot = f"{where}.answers.{kind}[{i}]"
                    if not isinstance(item, Mapping) or "text" not in item or "confidence" not in item:
                        raise MockFixtureError(f"{spot}: expected {{text, confidence}}")
                    conf = item["confidence"]
                    if isinstance(conf, bool) or not isinstance(conf, (int, float)) \
                            or not math.isfinite(float(conf)) or not 0.0 <= float(conf) <= 1.0:
                        raise MockFixtureError(f"{spot}: confidence must be in [0,1], got {conf!r}")
                    cands.append(AnswerCandidate(text=str(item["text"]), confidence=float(conf)))
                answers[kind] = cands
            scripts[qid] = QuestionScript(
                question=entry["question"], score_paths=scores,
                judge=list(judge) if isinstance(judge, list) else judge,
                answers=answers,
            )
        return cls(scripts=scripts)

    @staticmethod
    def _check_score(value: object, where: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or not math.isfinite(float(value)) or float(value) < 0:
            raise MockFixtureError(f"{where}: score must be finite and >= 0, got {value!r}")
        return float(value)

    @classmethod
    def load(cls, path: str | FsPath) -> "MockFixture":
        with FsPath(path).open("r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise MockFixtureError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)


class MockAdapter:
    """In-process adapter handle replaying a fixture; deterministic by construction.

    Unknown questions fall back to heuristics: scoring by token overlap with
    the question, judging by gold-answer token containment (gold answers come
    from the optional question list), answering by echoing the first
    high-priority path's tail entity at confidence 0.9.
    """

    HEALTH = {"model": "mock", "n_layers": 32, "attention_layer": 18}

    def __init__(self, fixture: MockFixture | None = None, questions: Iterable = ()):  # questions: Question-like
        self.fixture = fixture or MockFixture(scripts={})
        self._by_text: dict[str, QuestionScript] = {
            s.question: s for s in self.fixture.scripts.values()
        }
        self._gold_by_text: dict[str, tuple[str, ...]] = {}
        for q in questions:
            self._gold_by_text[q.text] = tuple(q.gold_answers)

    def health(self) -> dict:
        return dict(self.HEALTH)

    def score_paths(self, question: str, paths: Sequence[str]) -> list[float]:
        if not paths:
            raise ValueError("score_paths requires at least one path")
        script = self._by_text.get(question)
        if script is not None and script.score_paths is not None:
            if isinstance(script.score_paths, list):
                if len(script.score_paths) != len(paths):
                    raise MockFixtureError(
                        f"scripted score list for {question!r} has {len(script.score_paths)} "
                        f"entries but {len(paths)} paths were requested"
                    )
                return list(script.score_paths)
            return [
                script.score_paths.get(p, self._overlap_score(question, p))
                for p in paths
            ]
        return [self._overlap_score(question, p) for p in paths]

    def judge(self, question: str, paths: Sequence[str]) -> JudgeReply:
        script = self._by_text.get(question)
        if script is not None and script.judge is not None:
            if isinstance(script.judge, list):
                wanted = set(script.judge)
                selected = tuple(i for i, p in enumerate(paths) if p in wanted)
                return JudgeReply(selected=selected, raw=json.dumps({"selected": list(selected)}))
            # free-text mode: integers are passed through unvalidated
            text = script.judge
            ints = [int(m) for m in _INT.findall(text)]
            if ints:
                return JudgeReply(selected=tuple(ints), raw=text)
            if "none" in text.lower():
                return JudgeReply(selected=(), raw=text)
            return JudgeReply(selected=None, raw=text)
        gold = self._gold_by_text.get(question)
        if gold:
            gold_tokens = {t for ans in gold for t in tokenize(ans)}
            selected = tuple(
                i for i, p in enumerate(paths) if gold_tokens & set(tokenize(p))
            )
        else:
            selected = tuple(range(len(paths)))
        return JudgeReply(selected=selected, raw=json.dumps({"selected": list(selected)}))

    def answer(self, prompt: str, max_new_tokens: int = 256) -> AnswerReply:
        kind = "rag" if "Reasoning Paths:" in prompt else "llm_only"
        question = self._question_from_prompt(prompt)
        script = self._by_text.get(question)
        if script is not None and kind in script.answers:
            answers = tuple(script.answers[kind])
            raw = "\n".join(a.text for a in answers)
            return AnswerReply(answers=answers, raw_text=raw)
        if kind == "rag":
            tail = self._first_path_tail(prompt)
            if tail:
                return AnswerReply(answers=(AnswerCandidate(tail, 0.9),), raw_text=tail)
        return AnswerReply(answers=(), raw_text="")

    @staticmethod
    def _question_from_prompt(prompt: str) -> str:
        marker = "\nQuestion:\n"
        pos = prompt.rfind(marker)
        if pos < 0:
            return prompt.strip()
        return prompt[pos + len(marker):].strip()

    @staticmethod
    def _overlap_score(question: str, path_text: str) -> float:
        q_tokens = set(tokenize(question))
        if not q_tokens:
            return 0.0
        return len(q_tokens & set(tokenize(path_text))) / len(q_tokens)

    @staticmethod
    def _first_path_tail(prompt: str) -> str | None:
        in_paths = False
        for line in prompt.splitlines():
            if line in ("High Priority Paths:", "Additional Paths:"):
                in_paths = True
                continue
            if line in ("Question:", "Reasoning Paths:") or not line.strip():
                in_paths = False
                continue
            if in_paths:
                return line.rsplit(" → ", 1)[-1].strip()
        return None
