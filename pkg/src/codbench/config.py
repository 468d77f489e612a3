"""Global run configuration shared by every CLI flow."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import tomli

from .metrics import EPS

#: Environment variable overriding the default worker count.
WORKERS_ENV = "COD_BENCH_WORKERS"


@dataclass(frozen=True)
class GlobalConfig:
    """Defaults that every report echoes so results are self-describing."""

    binarize_threshold: float = 0.5
    em_threshold: float | None = None  # None = adaptive (2 * mean of the prediction)
    epsilon: float = EPS
    workers: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.binarize_threshold <= 1.0:
            raise ValueError(f"binarize_threshold must be in [0, 1], got {self.binarize_threshold}")
        if self.em_threshold is not None and not 0.0 <= self.em_threshold <= 1.0:
            raise ValueError(f"em_threshold must be in [0, 1], got {self.em_threshold}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def echo(self) -> dict:
        return {
            "binarize_threshold": self.binarize_threshold,
            "em_threshold": "adaptive" if self.em_threshold is None else self.em_threshold,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "workers": self.workers,
        }


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1, got {workers}")
    return workers


def load_toml_config(path: str | Path) -> dict:
    """Read a flat TOML table of flag names (underscored) to values."""
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must contain a TOML table")
    return data
