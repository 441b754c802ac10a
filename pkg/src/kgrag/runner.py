"""End-to-end run orchestration: retrieve, score, filter, prompt, integrate, record.

A run directory holds the exact config snapshot, per-question predictions
and audit records, the constructed prompts, and the evaluation summary.
Questions are processed by a bounded worker pool but committed to disk in
dataset order, so concurrency never changes the bytes written; partial runs
resume by skipping question ids already present in predictions.jsonl.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath

from .adapter import (
    AdapterClient,
    AdapterEndpointConfig,
    AdapterError,
    MockAdapter,
    MockFixture,
)
from .evaluation import (
    NoiseConfig,
    evaluate_records,
    inject_noise,
    load_predictions,
    path_contains_gold,
    score_question,
)
from .filtering import FilterConfig, run_filter_pipeline
from .integration import AnswerSet, IntegrationConfig, integrate
from .kg import load_graph
from .prompting import build_llm_only_prompt, build_prompt
from .retrieval import Question, RetrievalResult, ingest_paths, load_questions, retrieve_paths, verbalize
from .scoring import score_attention, score_pagerank, score_similarity

logger = logging.getLogger(__name__)

AUTH_TOKEN_ENV = "KGRAG_ADAPTER_TOKEN"


@dataclass
class RunConfig:
    """Flat, file-loadable configuration for one pipeline run."""

    graph: str = ""
    graph_format: str = "tsv"
    dataset: str = ""
    retrieval: str = "builtin"  # builtin | ingest
    max_hops: int = 2
    max_paths: int = 100
    ingest_path: str | None = None
    scorer: str = "attention"  # attention | similarity | pagerank
    coarse_mode: str = "top_k"
    coarse_k: int = 50
    coarse_tau: float = 0.0
    coarse_enabled: bool = True
    fine_enabled: bool = True
    judge_fallback: str = "keep_all"
    integration_enabled: bool = True
    tau_g: float = 0.5
    tau_l: float = 1.0
    integration_fallback: str = "graphrag_unfiltered"
    adapter: str = "mock"  # mock | http
    adapter_url: str | None = None
    adapter_timeout: float = 120.0
    adapter_retries: int = 2
    mock_fixture: str | None = None
    noise_enabled: bool = False
    noise_n: int = 30
    noise_seed: int = 0
    noise_corrupt_fraction: float = 0.5
    prompt_max_chars: int = 8000
    parallelism: int = 4
    output_dir: str = "run"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | FsPath) -> "RunConfig":
        with FsPath(path).open("r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def validate(self) -> None:
        if not self.graph:
            raise ValueError("config needs a graph path")
        if not self.dataset:
            raise ValueError("config needs a dataset path")
        if self.retrieval not in ("builtin", "ingest"):
            raise ValueError(f"retrieval must be builtin or ingest, got {self.retrieval!r}")
        if self.retrieval == "ingest" and not self.ingest_path:
            raise ValueError("retrieval=ingest needs ingest_path")
        if self.scorer not in ("attention", "similarity", "pagerank"):
            raise ValueError(f"scorer must be attention, similarity or pagerank, got {self.scorer!r}")
        if self.adapter not in ("mock", "http"):
            raise ValueError(f"adapter must be mock or http, got {self.adapter!r}")
        if self.adapter == "http" and not self.adapter_url:
            raise ValueError("adapter=http needs adapter_url")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")
        self.filter_config()  # raises on bad filter knobs
        self.integration_config()
        if self.noise_enabled:
            self.noise_config()

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            coarse_mode=self.coarse_mode,
            k=self.coarse_k,
            tau=self.coarse_tau,
            coarse_enabled=self.coarse_enabled,
            fine_enabled=self.fine_enabled,
            judge_fallback=self.judge_fallback,
        )

    def integration_config(self) -> IntegrationConfig:
        return IntegrationConfig(tau_g=self.tau_g, tau_l=self.tau_l, fallback=self.integration_fallback)

    def noise_config(self) -> NoiseConfig:
        return NoiseConfig(n_noise=self.noise_n, seed=self.noise_seed,
                           corrupt_fraction=self.noise_corrupt_fraction)


@dataclass
class QuestionRun:
    question_id: str
    prediction: dict
    audit: dict
    prompt_text: str | None = None
    llm_prompt_text: str | None = None
    failed: bool = False


@dataclass
class RunResult:
    run_dir: FsPath
    summary: dict | None
    n_questions: int
    failed_ids: list = field(default_factory=list)
    skipped_ids: list = field(default_factory=list)


def build_adapter(cfg: RunConfig, questions: list[Question]):
    if cfg.adapter == "mock":
        fixture = MockFixture.load(cfg.mock_fixture) if cfg.mock_fixture else None
        return MockAdapter(fixture, questions=questions)
    endpoint = AdapterEndpointConfig(
        base_url=cfg.adapter_url,
        timeout=cfg.adapter_timeout,
        retries=cfg.adapter_retries,
        auth_token=os.environ.get(AUTH_TOKEN_ENV) or None,
    )
    return AdapterClient(endpoint)


def _empty_result(q: Question, retriever_name: str) -> RetrievalResult:
    return RetrievalResult(q.id, (), source="ingested", retriever_name=retriever_name)


def process_question(
    q: Question,
    cfg: RunConfig,
    client,
    graph,
    ingested: dict[str, RetrievalResult] | None,
) -> QuestionRun:
    flags: list[str] = []
    if cfg.retrieval == "builtin":
        result = retrieve_paths(graph, q, cfg.max_hops, cfg.max_paths)
        if result.no_anchor:
            flags.append("no_anchor")
    else:
        result = ingested.get(q.id) if ingested else None
        if result is None:
            result = _empty_result(q, "external")
            flags.append("no_retrieval")

    if cfg.noise_enabled:
        result = inject_noise(graph, result, cfg.noise_config(), gold_answers=q.gold_answers)

    if result.paths:
        if cfg.scorer == "attention":
            scored = score_attention(client, q, result.paths)
        elif cfg.scorer == "similarity":
            scored = score_similarity(q, result.paths)
        else:
            scored = score_pagerank(graph, q, result.paths)
    else:
        scored = []

    outcome = run_filter_pipeline(client, q, scored, cfg.filter_config())
    flags.extend(outcome.flags)
    bundle = build_prompt(q, outcome, cfg.prompt_max_chars)

    integration_audit = None
    llm_prompt_text = None
    if cfg.integration_enabled:
        record = integrate(client, q, bundle, cfg.integration_config())
        flags.extend(record.flags)
        final = record.final
        integration_audit = record.to_audit(cfg.integration_config())
        llm_prompt_text = build_llm_only_prompt(q).text
    else:
        reply = client.answer(bundle.text)
        final = AnswerSet.from_candidates(reply.answers, origin="graphrag")

    origins = result.path_origins or tuple("retrieved" for _ in result.paths)
    scored_audit = [
        {
            "path": verbalize(sp.path),
            "score": round(sp.score, 6),
            "contains_gold": path_contains_gold(sp.path, q.gold_answers),
            "origin": origins[i],
        }
        for i, sp in enumerate(scored)
    ]

    metrics = None
    if q.gold_answers:
        m = score_question(final.texts(), q.gold_answers)
        metrics = {"hit": m.hit, "f1": round(m.f1, 6),
                   "precision": round(m.precision, 6), "recall": round(m.recall, 6)}

    prediction = {"question_id": q.id, "answers": final.texts(), "n_paths": len(result.paths)}
    audit = {
        "question_id": q.id,
        "question": q.text,
        "flags": flags,
        "retrieval_source": result.source,
        "retriever": result.retriever_name,
        "n_paths": len(result.paths),
        "n_noise": sum(1 for o in origins if o.startswith("noise:")),
        "scorer": cfg.scorer if scored else None,
        "scored_paths": scored_audit,
        "filter": {
            "coarse": len(outcome.coarse),
            "final": len(outcome.final),
            "residual": len(outcome.residual),
            "judge_raw": outcome.judge_raw,
        },
        "prompt": {
            "chars": len(bundle.text),
            "high_priority": bundle.high_priority_count,
            "additional": bundle.additional_count,
            "truncated": bundle.truncated,
        },
        "integration": integration_audit,
        "answers": final.texts(),
        "metrics": metrics,
        "error": None,
    }
    return QuestionRun(q.id, prediction, audit, bundle.text, llm_prompt_text)


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Execute a full run into cfg.output_dir; see the module docstring."""
    cfg.validate()
    graph = load_graph(cfg.graph, cfg.graph_format)
    questions = load_questions(cfg.dataset)
    ingested = None
    if cfg.retrieval == "ingest":
        ingested = {r.question_id: r for r in ingest_paths(cfg.ingest_path)}
    client = build_adapter(cfg, questions)

    run_dir = FsPath(cfg.output_dir)
    prompts_dir = run_dir / "prompts"
    prompts_dir.mkdir(parents=True, exist_ok=True)
    with (run_dir / "config.json").open("w", encoding="utf-8") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")

    predictions_path = run_dir / "predictions.jsonl"
    audit_path = run_dir / "audit.jsonl"
    done_ids: set[str] = set()
    if predictions_path.exists():
        done_ids = set(load_predictions(predictions_path))
        if done_ids:
            logger.info("resuming run: %d questions already done", len(done_ids))

    pending = [q for q in questions if q.id not in done_ids]
    results: dict[str, QuestionRun] = {}
    failed_ids: list[str] = []

    def worker(q: Question) -> QuestionRun:
        try:
            return process_question(q, cfg, client, graph, ingested)
        except AdapterError as exc:
            logger.error("question %s failed: %s", q.id, exc)
            prediction = {"question_id": q.id, "answers": [], "n_paths": 0}
            audit = {"question_id": q.id, "question": q.text, "flags": [exc.code],
                     "answers": [], "metrics": None, "error": str(exc)}
            return QuestionRun(q.id, prediction, audit, failed=True)

    with predictions_path.open("a", encoding="utf-8") as pred_fh, \
            audit_path.open("a", encoding="utf-8") as audit_fh:

        def commit(run: QuestionRun) -> None:
            pred_fh.write(json.dumps(run.prediction, ensure_ascii=False) + "\n")
            audit_fh.write(json.dumps(run.audit, ensure_ascii=False) + "\n")
            if run.prompt_text is not None:
                (prompts_dir / f"{run.question_id}.prompt.txt").write_text(run.prompt_text, encoding="utf-8")
            if run.llm_prompt_text is not None:
                (prompts_dir / f"{run.question_id}.llm_only.txt").write_text(run.llm_prompt_text, encoding="utf-8")
            if run.failed:
                failed_ids.append(run.question_id)

        # Commit strictly in dataset order as results become available, so the
        # files never depend on worker scheduling.
        commit_order = [q for q in pending]
        next_commit = 0
        if cfg.parallelism == 1:
            for q in pending:
                commit(worker(q))
        else:
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                futures = {pool.submit(worker, q): q.id for q in pending}
                outstanding = set(futures)
                while outstanding:
                    finished, outstanding = wait(outstanding, return_when=FIRST_COMPLETED)
                    for fut in finished:
                        run = fut.result()
                        results[run.question_id] = run
                    while next_commit < len(commit_order) and commit_order[next_commit].id in results:
                        commit(results.pop(commit_order[next_commit].id))
                        next_commit += 1

    summary_dict = None
    if all(q.gold_answers for q in questions):
        summary, _records = evaluate_records(questions, load_predictions(predictions_path))
        summary_dict = {
            "n_questions": summary.n_questions,
            "hit": round(summary.hit_pct, 2),
            "f1": round(summary.f1_pct, 2),
            "precision": round(summary.precision_pct, 2),
            "recall": round(summary.recall_pct, 2),
        }
        with (run_dir / "summary.json").open("w", encoding="utf-8") as fh:
            json.dump(summary_dict, fh, indent=2)
            fh.write("\n")
        (run_dir / "summary.csv").write_text(summary.as_csv(), encoding="utf-8")
        logger.info("run summary:\n%s", summary.as_table())
    else:
        logger.warning("dataset has questions without gold answers; skipping evaluation summary")

    return RunResult(
        run_dir=run_dir,
        summary=summary_dict,
        n_questions=len(questions),
        failed_ids=failed_ids,
        skipped_ids=sorted(done_ids),
    )
