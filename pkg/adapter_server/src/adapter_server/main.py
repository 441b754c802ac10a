"""CLI entry: load a model and serve the adapter protocol."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import uvicorn

from .app import create_app
from .config import ModelConfig
from .engine import InferenceEngine

AUTH_TOKEN_ENV = "ADAPTER_SERVER_TOKEN"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adapter-server", description=__doc__)
    parser.add_argument("--model", required=True, help="model id or local path")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8764)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--attention-layer", type=int, default=None,
                        help="override the floor(n_layers/2)+2 default")
    parser.add_argument("--max-context", type=int, default=2048)
    parser.add_argument("--auth-token", default=None,
                        help=f"bearer token (or set {AUTH_TOKEN_ENV})")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    cfg = ModelConfig(
        model_id=args.model,
        device=args.device,
        attention_layer_override=args.attention_layer,
        max_context_tokens=args.max_context,
    )
    try:
        engine = InferenceEngine(cfg)
    except Exception as exc:
        print(f"model load failed: {exc}", file=sys.stderr)
        return 1
    token = args.auth_token or os.environ.get(AUTH_TOKEN_ENV) or None
    app = create_app(engine, auth_token=token)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
