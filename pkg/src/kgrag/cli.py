"""Command-line entry points: run, eval, analyze, noise, serve-mock.

`run` takes a JSON config file with the flat keys of RunConfig; every key can
also be overridden one-for-one with a --key flag (dashes for underscores).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path as FsPath

from .adapter import MockAdapter, MockFixture
from .evaluation import (
    NoiseConfig,
    analyze_attention_by_gold,
    analyze_path_count,
    breakdown,
    categorize,
    evaluate_records,
    evaluate_run,
    inject_noise,
    load_predictions,
    path_count_csv,
)
from .kg import load_graph
from .mock_server import make_server
from .retrieval import ingest_paths, load_questions
from .runner import RunConfig, run_pipeline

logger = logging.getLogger(__name__)


def _add_run_overrides(parser: argparse.ArgumentParser) -> None:
    # every RunConfig key becomes a --flag override; None means "not given"
    for f in dataclass_fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            parser.add_argument(flag, type=_parse_bool, default=None, metavar="BOOL")
        elif f.type == "int":
            parser.add_argument(flag, type=int, default=None)
        elif f.type == "float":
            parser.add_argument(flag, type=float, default=None)
        else:
            parser.add_argument(flag, type=str, default=None)


def _parse_bool(value: str) -> bool:
    if value.lower() in ("1", "true", "yes", "on"):
        return True
    if value.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def cmd_run(args: argparse.Namespace) -> int:
    data = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    for f in dataclass_fields(RunConfig):
        override = getattr(args, f.name, None)
        if override is not None:
            data[f.name] = override
    cfg = RunConfig.from_dict(data)
    result = run_pipeline(cfg)
    print(f"run directory: {result.run_dir}")
    if result.summary:
        print(json.dumps(result.summary, indent=2))
    if result.failed_ids:
        print(f"{len(result.failed_ids)} question(s) failed: {', '.join(result.failed_ids[:10])}", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    summary, _records = evaluate_run(args.dataset, args.predictions)
    print(summary.as_table())
    if args.csv:
        FsPath(args.csv).write_text(summary.as_csv(), encoding="utf-8")
        print(f"wrote {args.csv}")
    return 0


def _per_question_f1(questions, predictions) -> dict[str, float]:
    _summary, records = evaluate_records(questions, predictions)
    return {r.question_id: r.f1 for r in records}


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.kind == "categories":
        questions = load_questions(args.dataset)
        preds_rag = load_predictions(args.rag)
        preds_llm = load_predictions(args.llm_only)
        missing = sorted(set(preds_rag) ^ set(preds_llm))
        if missing:
            raise SystemExit(f"prediction files disagree on question ids: {', '.join(missing)}")
        f1_rag = _per_question_f1(questions, preds_rag)
        f1_llm = _per_question_f1(questions, preds_llm)
        cats = [categorize(f1_rag[qid], f1_llm[qid]) for qid in sorted(f1_rag)]
        result = breakdown(cats)
        output = result.as_csv()
    elif args.kind == "path_count":
        records = []
        with open(args.audit, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec.get("metrics") is not None:
                    records.append((rec.get("n_paths", 0), rec["metrics"]["f1"]))
        if not records:
            raise SystemExit("audit file holds no scored questions (metrics missing)")
        output = path_count_csv(analyze_path_count(records, n_bins=args.bins, window=args.window))
    else:  # attention
        pairs = []
        with open(args.audit, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                for sp in rec.get("scored_paths", []):
                    pairs.append((sp["score"], sp["contains_gold"]))
        gold = [s for s, has_gold in pairs if has_gold]
        other = [s for s, has_gold in pairs if not has_gold]
        mean_gold = sum(gold) / len(gold) if gold else None
        mean_other = sum(other) / len(other) if other else None
        fmt = lambda v: f"{v:.6f}" if v is not None else "undefined"
        output = (
            "group,n,mean_score\n"
            f"gold,{len(gold)},{fmt(mean_gold)}\n"
            f"non_gold,{len(other)},{fmt(mean_other)}\n"
        )
    if args.out:
        FsPath(args.out).write_text(output, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(output, end="")
    return 0


def cmd_noise(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph, args.graph_format)
    gold_by_id = {}
    if args.dataset:
        gold_by_id = {q.id: q.gold_answers for q in load_questions(args.dataset)}
    cfg = NoiseConfig(n_noise=args.n, seed=args.seed, corrupt_fraction=args.corrupt_fraction)
    results = ingest_paths(args.paths)
    with open(args.out, "w", encoding="utf-8") as fh:
        for result in results:
            noisy = inject_noise(graph, result, cfg, gold_answers=gold_by_id.get(result.question_id, ()))
            origins = noisy.path_origins or tuple("retrieved" for _ in noisy.paths)
            for p, origin in zip(noisy.paths, origins):
                row = {
                    "question_id": noisy.question_id,
                    "entities": list(p.entities),
                    "relations": list(p.relations),
                    "origin": origin,
                }
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"wrote {args.out}")
    return 0


def cmd_serve_mock(args: argparse.Namespace) -> int:
    fixture = MockFixture.load(args.fixture) if args.fixture else None
    questions = load_questions(args.dataset) if args.dataset else ()
    mock = MockAdapter(fixture, questions=questions)
    server = make_server(mock, host=args.host, port=args.port, auth_token=args.auth_token)
    host, port = server.server_address[:2]
    print(f"mock adapter listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgrag", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline from a config file")
    p_run.add_argument("--config", help="JSON config file (flat RunConfig keys)")
    _add_run_overrides(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score a predictions file against a dataset")
    p_eval.add_argument("dataset")
    p_eval.add_argument("predictions")
    p_eval.add_argument("--csv", help="also write the summary as CSV")
    p_eval.set_defaults(func=cmd_eval)

    p_an = sub.add_parser("analyze", help="category / path-count / attention analyses")
    an_sub = p_an.add_subparsers(dest="kind", required=True)
    p_cat = an_sub.add_parser("categories")
    p_cat.add_argument("dataset")
    p_cat.add_argument("rag", help="predictions file of the retrieval-augmented run")
    p_cat.add_argument("llm_only", help="predictions file of the standalone run")
    p_cat.add_argument("--out")
    p_cat.set_defaults(func=cmd_analyze)
    p_pc = an_sub.add_parser("path_count")
    p_pc.add_argument("audit", help="audit.jsonl of a run")
    p_pc.add_argument("--bins", type=int, default=10)
    p_pc.add_argument("--window", type=int, default=3)
    p_pc.add_argument("--out")
    p_pc.set_defaults(func=cmd_analyze)
    p_att = an_sub.add_parser("attention")
    p_att.add_argument("audit", help="audit.jsonl of a run")
    p_att.add_argument("--out")
    p_att.set_defaults(func=cmd_analyze)

    p_noise = sub.add_parser("noise", help="inject synthetic noise into a retrieved-paths file")
    p_noise.add_argument("graph")
    p_noise.add_argument("paths", help="retrieved-paths JSONL")
    p_noise.add_argument("out")
    p_noise.add_argument("--graph-format", default="tsv")
    p_noise.add_argument("--dataset", help="dataset JSONL supplying gold answers to avoid")
    p_noise.add_argument("--n", type=int, default=30)
    p_noise.add_argument("--seed", type=int, default=0)
    p_noise.add_argument("--corrupt-fraction", type=float, default=0.5)
    p_noise.set_defaults(func=cmd_noise)

    p_serve = sub.add_parser("serve-mock", help="expose a mock fixture over the wire protocol")
    p_serve.add_argument("--fixture", help="mock fixture JSON")
    p_serve.add_argument("--dataset", help="dataset JSONL for heuristic replies")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8763)
    p_serve.add_argument("--auth-token")
    p_serve.set_defaults(func=cmd_serve_mock)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
