"""Point/line sets, incidence counting, determined lines and dyadic pigeonholing."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DataError, EmptyIncidenceError, TooFewPointsError
from .field import AffinePoint, AffLine, PlaneContext, canonical_line, line_through


class PointSet:
    """Sorted, deduplicated affine points of one plane."""

    __slots__ = ("p", "points", "_index")

    def __init__(self, p: int, points: Iterable = ()):
        self.p = p
        self.points = tuple(sorted({AffinePoint(x % p, y % p) for x, y in points}))
        self._index = {pt: i for i, pt in enumerate(self.points)}

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __contains__(self, pt):
        return pt in self._index

    def __eq__(self, other):
        return isinstance(other, PointSet) and (self.p, self.points) == (other.p, other.points)

    def __hash__(self):
        return hash((self.p, self.points))

    def __repr__(self):
        return f"PointSet(p={self.p}, n={len(self)})"

    def index(self, pt) -> int:
        return self._index[pt]

    def subset(self, points: Iterable) -> "PointSet":
        return PointSet(self.p, points)


class LineSet:
    """Sorted, deduplicated canonical affine lines of one plane."""

    __slots__ = ("p", "lines", "_index")

    def __init__(self, p: int, lines: Iterable = ()):
        self.p = p
        ctx = PlaneContext(p)
        self.lines = tuple(sorted({canonical_line(ctx, *l) for l in lines}))
        self._index = {l: i for i, l in enumerate(self.lines)}

    @classmethod
    def _trusted(cls, p: int, lines: Iterable[AffLine]) -> "LineSet":
        # lines already canonical; skips the re-canonicalization pass
        self = cls.__new__(cls)
        self.p = p
        self.lines = tuple(sorted(set(lines)))
        self._index = {l: i for i, l in enumerate(self.lines)}
        return self

    def __len__(self):
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    def __contains__(self, line):
        return line in self._index

    def __eq__(self, other):
        return isinstance(other, LineSet) and (self.p, self.lines) == (other.p, other.lines)

    def __hash__(self):
        return hash((self.p, self.lines))

    def __repr__(self):
        return f"LineSet(p={self.p}, n={len(self)})"

    def subset(self, lines: Iterable[AffLine]) -> "LineSet":
        return LineSet._trusted(self.p, lines)


@dataclass(frozen=True)
class IncidenceProfile:
    total: int
    degree: dict  # point -> number of incident lines
    richness: dict  # line -> number of incident points

    def __post_init__(self):
        assert sum(self.degree.values()) == self.total == sum(self.richness.values())


@dataclass(frozen=True)
class DyadicClass:
    """Members whose degree (or richness) lies in [level, 2*level)."""

    members: tuple
    level: int
    mass: int  # |members| * level for points, |members| * level**2 for lines
    n_classes: int  # number of occupied dyadic classes


def _check_same_plane(P: PointSet, L: LineSet):
    if P.p != L.p:
        raise DataError(f"point set over F_{P.p} and line set over F_{L.p}")


def count_incidences(P: PointSet, L: LineSet, method: str = "bucket") -> IncidenceProfile:
    """Exact incidence count with per-point degrees and per-line richness.

    ``naive`` tests every (point, line) pair; ``bucket`` groups lines by
    direction and, for each point, looks up the one line of each direction
    through it.
    """
    _check_same_plane(P, L)
    if method == "naive":
        return _count_naive(P, L)
    if method == "bucket":
        return _count_bucket(P, L)
    raise DataError(f"unknown method {method!r}")


def _count_naive(P: PointSet, L: LineSet) -> IncidenceProfile:
    p = P.p
    degree = dict.fromkeys(P.points, 0)
    richness = dict.fromkeys(L.lines, 0)
    total = 0
    for line in L.lines:
        a, b, c = line
        n = 0
        for pt in P.points:
            if (a * pt[0] + b * pt[1] - c) % p == 0:
                degree[pt] += 1
                n += 1
        richness[line] = n
        total += n
    return IncidenceProfile(total, degree, richness)


def _count_bucket(P: PointSet, L: LineSet) -> IncidenceProfile:
    p = P.p
    by_direction = defaultdict(set)
    for a, b, c in L.lines:
        by_direction[(a, b)].add(c)
    degree = dict.fromkeys(P.points, 0)
    richness = dict.fromkeys(L.lines, 0)
    total = 0
    for pt in P.points:
        x, y = pt
        d = 0
        for (a, b), cs in by_direction.items():
            c = (a * x + b * y) % p
            if c in cs:
                richness[AffLine(a, b, c)] += 1
                d += 1
        degree[pt] = d
        total += d
    return IncidenceProfile(total, degree, richness)


def incidences(P: PointSet, L: LineSet) -> int:
    return count_incidences(P, L).total


def lines_with_points(P: PointSet) -> dict:
    """Map every determined line to the sorted tuple of points of P on it."""
    if len(P) < 2:
        raise TooFewPointsError(f"need at least 2 points, got {len(P)}")
    ctx = PlaneContext(P.p)
    on_line = defaultdict(set)
    pts = P.points
    for i, u in enumerate(pts):
        for v in pts[i + 1:]:
            l = line_through(ctx, u, v)
            s = on_line[l]
            s.add(u)
            s.add(v)
    return {l: tuple(sorted(s)) for l, s in on_line.items()}


def lines_determined(P: PointSet) -> LineSet:
    return LineSet._trusted(P.p, lines_with_points(P))


def max_collinear(P: PointSet) -> tuple[AffLine, int]:
    """A line holding the most points of P (smallest canonical line on ties)."""
    best_line, best = None, 0
    for line, pts in sorted(lines_with_points(P).items()):
        if len(pts) > best:
            best_line, best = line, len(pts)
    return best_line, best


def dyadic_level(n: int) -> int:
    """Largest power of two not exceeding n (n >= 1)."""
    return 1 << (n.bit_length() - 1)


def _dyadic_classes(counts: dict) -> dict:
    classes = defaultdict(list)
    for item, n in counts.items():
        if n > 0:
            classes[dyadic_level(n)].append(item)
    return classes


def dyadic_select_points(P: PointSet, L: LineSet) -> DyadicClass:
    """Degree class [K, 2K) maximizing |P1| * K; ties go to the smaller K.

    The guarantee that holds exactly is |P1| * K >= I / (2 * number of
    occupied classes), hence |P1| * K >= I / (2 * ceil(log2(2|L|))).
    """
    prof = count_incidences(P, L)
    if prof.total == 0:
        raise EmptyIncidenceError("no incidences to pigeonhole")
    classes = _dyadic_classes(prof.degree)
    K = max(classes, key=lambda k: (len(classes[k]) * k, -k))
    members = tuple(sorted(classes[K]))
    return DyadicClass(members, K, len(members) * K, len(classes))


def dyadic_select_lines(P: PointSet, L: LineSet) -> DyadicClass:
    """Richness class [k, 2k) maximizing |L1| * k^2; ties go to the smaller k."""
    prof = count_incidences(P, L)
    if prof.total == 0:
        raise EmptyIncidenceError("no incidences to pigeonhole")
    classes = _dyadic_classes(prof.richness)
    k = max(classes, key=lambda j: (len(classes[j]) * j * j, -j))
    members = tuple(sorted(classes[k]))
    return DyadicClass(members, k, len(members) * k * k, len(classes))


def log_factor(n: int) -> int:
    """ceil(log2(2n)), the number of dyadic classes available below n."""
    return max(1, math.ceil(math.log2(2 * n)))


# -- file formats ---------------------------------------------------------


def _read_rows(path, width):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                rows.append(tuple(int(v) for v in row))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return rows


def load_points(path, p: int) -> PointSet:
    rows = _read_rows(path, 2)
    P = PointSet(p, rows)
    if len(P) != len(rows):
        raise DataError(f"{path}: duplicate points (mod {p})")
    return P


def load_lines(path, p: int) -> LineSet:
    rows = _read_rows(path, 3)
    L = LineSet(p, rows)
    if len(L) != len(rows):
        raise DataError(f"{path}: duplicate lines after canonicalization (mod {p})")
    return L


def save_points(path, P: PointSet):
    with open(Path(path), "w", newline="") as fh:
        csv.writer(fh).writerows(P.points)


def save_lines(path, L: LineSet):
    with open(Path(path), "w", newline="") as fh:
        csv.writer(fh).writerows(L.lines)
