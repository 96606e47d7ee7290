"""Command-line entry point: parse flags, build the app, serve it."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import BridgeConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tablebridge",
        description="Serve embedding and chat-completion endpoints",
    )
    defaults = BridgeConfig()
    parser.add_argument("--host", default=defaults.host)
    parser.add_argument("--port", type=int, default=defaults.port)
    parser.add_argument("--embed-model", default=defaults.embed_model)
    parser.add_argument("--chat-model", default=defaults.chat_model)
    parser.add_argument("--max-batch", type=int, default=defaults.max_batch)
    parser.add_argument(
        "--max-text-tokens", type=int, default=defaults.max_text_tokens
    )
    parser.add_argument("--device", default=defaults.device)
    parser.add_argument(
        "--token-env",
        default=defaults.token_env,
        help="environment variable holding the shared bearer token",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = BridgeConfig(
        host=args.host,
        port=args.port,
        embed_model=args.embed_model,
        chat_model=args.chat_model,
        max_batch=args.max_batch,
        max_text_tokens=args.max_text_tokens,
        device=args.device,
        token_env=args.token_env,
    )
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
