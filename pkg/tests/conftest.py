import math
import random

import pytest


def log_uniform(rng: random.Random, lo: int, hi: int) -> int:
    """Sizes drawn log-uniformly: most small, the caps still exercised."""
    if lo >= hi:
        return lo
    return min(hi, int(math.exp(rng.uniform(math.log(lo), math.log(hi + 1)))))


@pytest.fixture
def rng():
    return random.Random(0xDEC0)
