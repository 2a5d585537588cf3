import random
from fractions import Fraction

import pytest

from bellmd.algebra import ProductSet
from bellmd.multidev import DistVector


def random_distribution(rng: random.Random, ps: ProductSet, zeros: float = 0.0) -> DistVector:
    w = [0 if rng.random() < zeros else rng.randint(1, 20) for _ in range(ps.n)]
    if not any(w):
        w[0] = 1
    t = sum(w)
    return DistVector(ps, [Fraction(x, t) for x in w], probability=True)


def random_function(rng: random.Random, ps: ProductSet) -> DistVector:
    return DistVector(ps, [Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(ps.n)])


def random_sizes(rng: random.Random, max_n: int = 36, max_len: int = 4) -> ProductSet:
    while True:
        sizes = [rng.choice([2, 3]) for _ in range(rng.randint(1, max_len))]
        ps = ProductSet(sizes)
        if ps.n <= max_n:
            return ps


@pytest.fixture
def rng():
    return random.Random(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
