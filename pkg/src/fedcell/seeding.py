"""Deterministic derivation of independent random streams.

Every random draw in the simulator comes from a generator keyed by the run
seed plus a fixed purpose tag (and, for per-round noise, the round/cell/user
indices).  Streams therefore never depend on evaluation order.
"""
from __future__ import annotations

from numpy.random import Generator, PCG64, SeedSequence

_MASK64 = (1 << 64) - 1

# purpose tags; values are arbitrary but frozen, changing one changes every result
POSITIONS = 0
FADING = 1
PARTITION = 2
INIT = 10
WEIGHTS = 20
SHARDS = 21
NOISE = 22
DATASET = 30


def subseed(*parts: int) -> SeedSequence:
    return SeedSequence([int(p) & _MASK64 for p in parts])


def stream(*parts: int) -> Generator:
    """Generator for the stream identified by (seed, tag, *indices)."""
    return Generator(PCG64(subseed(*parts)))
