from collections import Counter

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

RING = np.array([[1, 1, 1], [1, 9, 1], [1, 1, 1]])
SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def edge_values(cx) -> dict[tuple[int, int], float]:
    return {tuple(s): v for s, d, v in cx.simplices() if d == 1}


def is_cycle(edges) -> bool:
    deg = Counter(x for e in edges for x in e)
    return bool(edges) and all(k % 2 == 0 for k in deg.values())


def check_generators(cx, barcode) -> None:
    """Every H1 representative is a cycle of the complex alive when it should be."""
    ev = edge_values(cx)
    for iv in barcode.dim(1):
        assert is_cycle(iv.cycle), iv
        assert len(set(iv.cycle)) == len(iv.cycle)
        assert iv.generator == tuple(sorted({x for e in iv.cycle for x in e}))
        at = iv.birth if iv.essential else iv.death
        assert all(ev[e] <= at for e in iv.cycle)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
