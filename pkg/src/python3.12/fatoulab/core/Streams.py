#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Per-trial random streams and ordered trial parallelism.

Every trial owns a PCG64 generator seeded by `mix_seed(master, trial)`,
the SplitMix64 finalizer applied to `master + (trial + 1) * GOLDEN`
modulo 2**64:

    z = master + (trial + 1) * 0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

all arithmetic modulo 2**64.  Any implementation using these constants
and PCG64 reproduces identical streams.
"""

from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Final, Iterator, Sequence

import numpy          as NP
import more_itertools as MI

from .Types    import ConfigError, FArray, IArray
from ..config  import Settings


__all__: list[str] = [
    'MASK64', 'GOLDEN', 'MIX1', 'MIX2',
    'mix_seed', 'trial_rng', 'trial_rngs', 'cumulative', 'draw_indices',
    'index_blocks', 'map_trials', 'unit_ball',
]


MASK64: Final[int] = (1 << 64) - 1
GOLDEN: Final[int] = 0x9E3779B97F4A7C15
MIX1  : Final[int] = 0xBF58476D1CE4E5B9
MIX2  : Final[int] = 0x94D049BB133111EB


def mix_seed(master: int, trial: int) -> int:
    if trial < 0:
        raise ConfigError(f"Trial index must be nonnegative: {trial}")
    z = (master + (trial + 1) * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def trial_rng(master: int, trial: int) -> NP.random.Generator:
    return NP.random.Generator(NP.random.PCG64(mix_seed(master, trial)))


def trial_rngs(master: int, trials: Sequence[int] | range
               ) -> list[NP.random.Generator]:
    return [trial_rng(master, t) for t in trials]


def cumulative(probabilities: FArray) -> FArray:
    cdf = NP.cumsum(probabilities, dtype=NP.float64)
    cdf[-1] = 1.0
    return cdf


def draw_indices(rng: NP.random.Generator, cdf: FArray, count: int) -> IArray:
    """Atom indices from `count` uniform doubles through the cdf."""
    u = rng.random(count)
    idx = NP.searchsorted(cdf, u, side='right')
    return NP.minimum(idx, len(cdf) - 1).astype(NP.int64)


def index_blocks(rngs: Sequence[NP.random.Generator], cdf: FArray,
                 total: int, block: int | None = None) -> Iterator[IArray]:
    """Yield (trials, <=block) index arrays covering `total` steps.

    Draws are taken block by block from each stream, so the first k steps
    are the same whatever `total` is.
    """
    block = block if block else Settings().BLOCK
    for chunk in MI.chunked(range(total), block):
        yield NP.stack([draw_indices(r, cdf, len(chunk)) for r in rngs]
                       ) if rngs else NP.zeros((0, len(chunk)), NP.int64)


def unit_ball(rng: NP.random.Generator, count: int, dimension: int
              ) -> NP.ndarray:
    """Uniform points of the unit ball of C^dimension, shape (count, dim)."""
    g = rng.standard_normal((count, 2 * dimension))
    g /= NP.linalg.norm(g, axis=1, keepdims=True)
    g *= rng.random((count, 1)) ** (1.0 / (2 * dimension))
    return g[:, 0::2] + 1j * g[:, 1::2]


def map_trials[R](fn: Callable[[range], list[R]], trials: int,
                  threads: int | None = None) -> list[R]:
    """Run `fn` on contiguous trial ranges and concatenate in trial order."""
    threads = threads if threads else Settings().THREADS
    if trials <= 0:
        return []
    if threads <= 1 or trials == 1:
        return fn(range(trials))
    size = -(-trials // threads)
    ranges = [range(lo, min(lo + size, trials))
              for lo in range(0, trials, size)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(fn, ranges))
    return list(MI.flatten(parts))
