"""CLI entry: load a model backend and serve the protocol over HTTP."""

import argparse

import uvicorn

from .app import create_app
from .config import ServiceConfig
from .models import load_backend


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="segserv")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8400)
    parser.add_argument("--model", choices=["clipseg", "heuristic"], default="clipseg")
    parser.add_argument("--model-id", default="CIDAS/clipseg-rd64-refined")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    config = ServiceConfig(
        model=args.model,
        model_id=args.model_id,
        device=args.device,
        host=args.host,
        port=args.port,
    )
    backend = load_backend(config.model, config.model_id, config.device)
    app = create_app(config, backend=backend)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
