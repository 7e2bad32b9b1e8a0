"""Process-wide tolerances and enumeration caps (the CLI overrides these)."""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass
class Settings:
    tol: float = 1e-9
    hull_cap: int = 16  # exhaustive sign enumeration in UnconditionalHull
    tsirelson_cap: int = 12
    enum_cap: int = 20  # subset enumeration (sigma_m, fundamental functions)
    dp_cap: int = 12  # bitmask DP in the disjoint-family evaluator
    atom_cap: int = 200_000  # largest atom list we materialize for an LP
    threads: int = int(os.environ.get("GREEDYLAB_THREADS", "1") or 1)


settings = Settings()


class CapExceeded(ValueError):
    """An exhaustive computation would exceed a configured cap."""

    def __init__(self, cap_name: str, value: int, limit: int):
        super().__init__(f"{cap_name} exceeded: {value} > {limit}")
        self.cap_name = cap_name
        self.value = value
        self.limit = limit
