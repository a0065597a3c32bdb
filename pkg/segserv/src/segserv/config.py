from dataclasses import dataclass


@dataclass(frozen=True)
class ServiceConfig:
    """Runtime configuration; prompt fusion is always elementwise max."""

    model: str = "clipseg"  # "clipseg" or "heuristic"
    model_id: str = "CIDAS/clipseg-rd64-refined"
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8400
