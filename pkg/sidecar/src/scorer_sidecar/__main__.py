"""Service entry point: load models, then serve until interrupted."""

from __future__ import annotations

import argparse
import sys

from .app import create_app
from .backends import BackendError, build_backends
from .config import DEFAULT_EMBED_MODEL, DEFAULT_NLI_MODEL, SidecarConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorer-sidecar",
        description="Serve NLI probabilities and sentence embeddings over HTTP.",
    )
    parser.add_argument(
        "--nli-model",
        default=DEFAULT_NLI_MODEL,
        help="NLI checkpoint id (default: %(default)s)",
    )
    parser.add_argument(
        "--embed-model",
        default=DEFAULT_EMBED_MODEL,
        help="sentence-embedding checkpoint id (default: %(default)s)",
    )
    parser.add_argument("--host", default="127.0.0.1", help="bind address (default: %(default)s)")
    parser.add_argument("--port", type=int, default=8600, help="bind port (default: %(default)s)")
    parser.add_argument(
        "--max-batch",
        type=int,
        default=64,
        help="largest accepted batch per request (default: %(default)s)",
    )
    parser.add_argument(
        "--backend",
        choices=["real", "offline"],
        default="real",
        help="'real' loads the configured checkpoints; 'offline' serves "
        "deterministic text-derived scores with no downloads (default: %(default)s)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = SidecarConfig(
            nli_model_id=args.nli_model,
            embed_model_id=args.embed_model,
            host=args.host,
            port=args.port,
            max_batch=args.max_batch,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        nli_backend, embed_backend = build_backends(config, offline=args.backend == "offline")
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    import uvicorn

    app = create_app(config, nli_backend, embed_backend)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
