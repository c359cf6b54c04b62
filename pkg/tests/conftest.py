import random

import pytest

from fpinc.field import PlaneContext, all_lines, all_points
from fpinc.incidence import LineSet, PointSet


@pytest.fixture
def full_plane():
    def make(p):
        ctx = PlaneContext(p)
        return PointSet(p, all_points(ctx)), LineSet(p, all_lines(ctx))

    return make


def random_instance(rng: random.Random, p: int, n_points: int, n_lines: int):
    """Distinct random points and lines, drawn with the stdlib RNG so the
    test data does not depend on the package's own generator."""
    cells = rng.sample(range(p * p), min(n_points, p * p))
    P = PointSet(p, [divmod(v, p) for v in cells])
    lines = set()
    while len(lines) < min(n_lines, p * p + p):
        a, b, c = rng.randrange(p), rng.randrange(p), rng.randrange(p)
        if a or b:
            lines.add((a, b, c))
    L = LineSet(p, lines)
    return P, L


def brute_incidences(P: PointSet, L: LineSet) -> int:
    p = P.p
    return sum(1 for (x, y) in P for (a, b, c) in L if (a * x + b * y - c) % p == 0)
