"""Command line entry point."""

from __future__ import annotations

import os
from pathlib import Path

import click
import uvicorn

from .registry import default_registry, load_registry
from .service import build_service

PORT_ENV = "HARMONY_SIDE_PORT"


@click.command()
@click.option(
    "--models",
    "registry_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Registry JSON mapping model ids to local weight directories; "
    "without it the upstream weight locations are used.",
)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--port",
    type=int,
    default=None,
    help=f"Defaults to ${PORT_ENV} or 8500.",
)
def main(registry_file: Path | None, host: str, port: int | None) -> None:
    """Serve transformer embeddings and keyword extraction over HTTP."""
    registry = (
        load_registry(registry_file) if registry_file else default_registry()
    )
    if port is None:
        port = int(os.environ.get(PORT_ENV, "8500"))
    app = build_service(registry)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
