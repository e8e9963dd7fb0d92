"""Run-wide defaults. Everything here can be overridden per call."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

# red -> purple progression used for concentric ball series
COLOR_CYCLE = (
    "#e41a1c", "#ff7f00", "#e6c619", "#4daf4a",
    "#17becf", "#377eb8", "#6a3d9a", "#984ea3",
)


@dataclass(frozen=True)
class Config:
    tol: float = 1e-9
    raster_cells: int = 256
    colors: tuple[str, ...] = COLOR_CYCLE
    seed: int = 0
    output_dir: str = "."
    threads: int = field(default_factory=lambda: thread_count())

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


def thread_count() -> int:
    raw = os.environ.get("SMOCK_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


DEFAULT = Config()
