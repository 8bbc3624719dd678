"""Shared builders for randomized tests.

Edge weights come from a coarse grid of quarter multiples so that sums of
a few of them are exactly representable in float32 and float64 alike;
tests can then assert exact float equality where the contracts promise it.
"""

import random

import numpy as np
import pytest

from embanks.graph import DataGraph, GraphBuilder
from embanks.search import KeywordSets

WEIGHT_GRID = [i / 4 for i in range(1, 17)]


def random_graph(rng: random.Random, n: int, extra_links: int | None = None,
                 prestige_max: int = 5, connected: bool = True) -> DataGraph:
    """A random link graph; link direction is random per link."""
    b = GraphBuilder()
    for _ in range(n):
        b.add_node(float(rng.randint(0, prestige_max)))
    if connected:
        for i in range(1, n):
            t = rng.randrange(i)
            u, v = (i, t) if rng.random() < 0.5 else (t, i)
            b.add_link(u, v, rng.choice(WEIGHT_GRID), rng.choice(WEIGHT_GRID))
    extra = n // 2 if extra_links is None else extra_links
    for _ in range(extra):
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v:
            continue
        b.add_link(u, v, rng.choice(WEIGHT_GRID), rng.choice(WEIGHT_GRID))
    return b.build()


def random_keyword_sets(rng: random.Random, n: int, nsets: int,
                        max_size: int = 3) -> KeywordSets:
    sets = []
    for _ in range(nsets):
        size = rng.randint(1, min(max_size, n))
        sets.append(frozenset(rng.sample(range(n), size)))
    return KeywordSets([f"t{i}" for i in range(nsets)], sets)


@pytest.fixture
def rng():
    return random.Random(20250814)
