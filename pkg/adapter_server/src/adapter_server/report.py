"""Directional attention report: do gold-bearing paths attract more attention?

Runs the engine's path scorer over hand-labeled question/path sets and
compares the mean score of paths containing the gold answer against the
rest. The outcome depends on the model; this is a recorded observation,
not a gate. Expect separation from instruction-tuned models and noise from
small or untrained ones.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ModelConfig
from .engine import InferenceEngine

logger = logging.getLogger(__name__)

DEFAULT_DATA = Path(__file__).resolve().parents[2] / "data" / "labeled_sets.json"


def load_labeled_sets(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        sets = json.load(fh)
    for i, entry in enumerate(sets):
        if "question" not in entry or "paths" not in entry:
            raise ValueError(f"labeled set {i} needs question and paths")
        if not any(p["contains_gold"] for p in entry["paths"]):
            raise ValueError(f"labeled set {i} has no gold-bearing path")
        if all(p["contains_gold"] for p in entry["paths"]):
            raise ValueError(f"labeled set {i} has no non-gold path")
    return sets


def generate_report(engine: InferenceEngine, sets: list[dict]) -> dict:
    gold_scores: list[float] = []
    non_gold_scores: list[float] = []
    per_set = []
    for entry in sets:
        texts = [p["text"] for p in entry["paths"]]
        reply = engine.score_paths(entry["question"], texts)
        golds = [s for s, p in zip(reply.scores, entry["paths"]) if p["contains_gold"]]
        others = [s for s, p in zip(reply.scores, entry["paths"]) if not p["contains_gold"]]
        gold_scores.extend(golds)
        non_gold_scores.extend(others)
        per_set.append({
            "question": entry["question"],
            "mean_gold": sum(golds) / len(golds),
            "mean_non_gold": sum(others) / len(others),
        })
    mean_gold = sum(gold_scores) / len(gold_scores)
    mean_non_gold = sum(non_gold_scores) / len(non_gold_scores)
    return {
        "model": engine.cfg.model_id,
        "attention_layer": engine.attention_layer,
        "n_layers": engine.n_layers,
        "n_sets": len(sets),
        "n_gold_paths": len(gold_scores),
        "n_non_gold_paths": len(non_gold_scores),
        "mean_gold": mean_gold,
        "mean_non_gold": mean_non_gold,
        "gold_minus_non_gold": mean_gold - mean_non_gold,
        "separation": mean_gold > mean_non_gold,
        "sets_with_separation": sum(1 for s in per_set if s["mean_gold"] > s["mean_non_gold"]),
        "per_set": per_set,
    }


def render_markdown(report: dict) -> str:
    lines = [
        "# Attention direction report",
        "",
        f"Model: `{report['model']}` ({report['n_layers']} layers, scoring layer {report['attention_layer']})",
        "",
        f"- labeled sets: {report['n_sets']}",
        f"- gold-bearing paths: {report['n_gold_paths']}, other paths: {report['n_non_gold_paths']}",
        f"- mean score, gold-bearing: {report['mean_gold']:.6f}",
        f"- mean score, non-gold: {report['mean_non_gold']:.6f}",
        f"- difference: {report['gold_minus_non_gold']:+.6f}",
        f"- sets where gold outranks non-gold: {report['sets_with_separation']}/{report['n_sets']}",
        "",
        "Directional observation only; rerun against the model you deploy.",
        "",
    ]
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="attention-report", description=__doc__)
    parser.add_argument("--model", required=True)
    parser.add_argument("--data", default=str(DEFAULT_DATA))
    parser.add_argument("--out", default="attention_direction")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--attention-layer", type=int, default=None)
    parser.add_argument("--max-context", type=int, default=2048)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)

    engine = InferenceEngine(ModelConfig(
        model_id=args.model,
        device=args.device,
        attention_layer_override=args.attention_layer,
        max_context_tokens=args.max_context,
    ))
    sets = load_labeled_sets(args.data)
    report = generate_report(engine, sets)
    json_path = Path(f"{args.out}.json")
    md_path = Path(f"{args.out}.md")
    json_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    md_path.write_text(render_markdown(report), encoding="utf-8")
    print(render_markdown(report))
    print(f"wrote {json_path} and {md_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
