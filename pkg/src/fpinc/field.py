"""Arithmetic in F_p and canonical forms for points, lines and projective maps.

Field elements are plain ints reduced into ``range(p)``. Affine lines
``a*x + b*y = c`` are scaled so the first nonzero of ``(a, b)`` is 1, and
projective points so their last nonzero coordinate is 1; with these forms
tuple equality is geometric equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

from .errors import CollinearError, DataError, DegeneratePairError, ZeroInverseError

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PlaneContext:
    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 2 or self.p >= 2**61:
            raise DataError(f"modulus must be a prime below 2**61, got {self.p!r}")
        if not is_prime(self.p):
            raise DataError(f"modulus {self.p} is not prime")

    def __repr__(self):
        return f"PlaneContext(p={self.p})"


class AffinePoint(NamedTuple):
    x: int
    y: int


class AffLine(NamedTuple):
    """The line a*x + b*y = c."""

    a: int
    b: int
    c: int


class ProjPoint(NamedTuple):
    X: int
    Y: int
    Z: int

    @property
    def is_affine(self) -> bool:
        return self.Z != 0

    def affine(self) -> AffinePoint:
        if self.Z == 0:
            raise DataError(f"{self} lies on the line at infinity")
        return AffinePoint(self.X, self.Y)


AnyPoint = Union[AffinePoint, ProjPoint]

ORIGIN = ProjPoint(0, 0, 1)
X_DIRECTION = ProjPoint(1, 0, 0)
Y_DIRECTION = ProjPoint(0, 1, 0)


def fp_inv(ctx: PlaneContext, x: int) -> int:
    x %= ctx.p
    if x == 0:
        raise ZeroInverseError(f"0 has no inverse mod {ctx.p}")
    return pow(x, -1, ctx.p)


def point(ctx: PlaneContext, x: int, y: int) -> AffinePoint:
    return AffinePoint(x % ctx.p, y % ctx.p)


def canonical_line(ctx: PlaneContext, a: int, b: int, c: int) -> AffLine:
    p = ctx.p
    a, b, c = a % p, b % p, c % p
    if a:
        s = pow(a, -1, p)
    elif b:
        s = pow(b, -1, p)
    else:
        raise DataError(f"({a}, {b}, {c}) does not define a line")
    return AffLine(1 if a else 0, b * s % p, c * s % p)


def proj_point(ctx: PlaneContext, X: int, Y: int, Z: int) -> ProjPoint:
    return _canonical_proj(ctx.p, X, Y, Z)


def _canonical_proj(p: int, X: int, Y: int, Z: int) -> ProjPoint:
    X, Y, Z = X % p, Y % p, Z % p
    for last in (Z, Y, X):
        if last:
            s = pow(last, -1, p)
            return ProjPoint(X * s % p, Y * s % p, Z * s % p)
    raise DataError("(0, 0, 0) is not a projective point")


def lift(pt: AnyPoint) -> tuple[int, int, int]:
    """Homogeneous coordinates; affine points become (x, y, 1)."""
    if isinstance(pt, ProjPoint):
        return tuple(pt)
    x, y = pt
    return (x, y, 1)


def line_through(ctx: PlaneContext, p: AffinePoint, q: AffinePoint) -> AffLine:
    m = ctx.p
    (x1, y1), (x2, y2) = p, q
    dx, dy = (x2 - x1) % m, (y2 - y1) % m
    if dx == 0 and dy == 0:
        raise DegeneratePairError(f"{tuple(p)} and {tuple(q)} do not determine a line")
    # normal vector (dy, -dx)
    if dy:
        s = pow(dy, -1, m)
        b = -dx * s % m
        return AffLine(1, b, (x1 + b * y1) % m)
    return AffLine(0, 1, y1 % m)


def incident(ctx: PlaneContext, pt: AffinePoint, line: AffLine) -> bool:
    return (line.a * pt[0] + line.b * pt[1] - line.c) % ctx.p == 0


def join(ctx: PlaneContext, u: AnyPoint, v: AnyPoint) -> tuple[int, int, int]:
    """Canonical homogeneous coordinates (l0, l1, l2) of the projective line
    through u and v, i.e. the cross product of their lifts, scaled so the
    first nonzero entry is 1."""
    p = ctx.p
    u0, u1, u2 = lift(u)
    v0, v1, v2 = lift(v)
    l = ((u1 * v2 - u2 * v1) % p, (u2 * v0 - u0 * v2) % p, (u0 * v1 - u1 * v0) % p)
    for lead in l:
        if lead:
            s = pow(lead, -1, p)
            return tuple(t * s % p for t in l)
    raise DegeneratePairError(f"{u} and {v} are the same projective point")


@dataclass(frozen=True)
class ProjMap:
    p: int
    rows: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if len(self.rows) != 3 or any(len(r) != 3 for r in self.rows):
            raise DataError("ProjMap needs a 3x3 matrix")
        rows = tuple(tuple(v % self.p for v in r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if _det3(rows, self.p) == 0:
            raise CollinearError("singular matrix does not define a projective map")

    @classmethod
    def identity(cls, p: int) -> "ProjMap":
        return cls(p, ((1, 0, 0), (0, 1, 0), (0, 0, 1)))

    def inverse(self) -> "ProjMap":
        return ProjMap(self.p, _inv3(self.rows, self.p))

    def transpose(self) -> "ProjMap":
        return ProjMap(self.p, tuple(zip(*self.rows)))

    def apply_vector(self, v) -> tuple[int, int, int]:
        p = self.p
        return tuple(sum(r[i] * v[i] for i in range(3)) % p for r in self.rows)


def _det3(m, p: int) -> int:
    (a, b, c), (d, e, f), (g, h, i) = m
    return (a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)) % p


def _inv3(m, p: int):
    det = _det3(m, p)
    if det == 0:
        raise CollinearError("matrix is singular mod p")
    (a, b, c), (d, e, f), (g, h, i) = m
    adj = (
        (e * i - f * h, c * h - b * i, b * f - c * e),
        (f * g - d * i, a * i - c * g, c * d - a * f),
        (d * h - e * g, b * g - a * h, a * e - b * d),
    )
    s = pow(det, -1, p)
    return tuple(tuple(v * s % p for v in row) for row in adj)


def build_tau(ctx: PlaneContext, p1: AnyPoint, p3: AnyPoint, p4: AnyPoint) -> ProjMap:
    """Projective map sending p3 to [1:0:0], p4 to [0:1:0] and p1 to the origin.

    This is the inverse of the matrix whose columns are the lifts of
    p3, p4, p1, so the images are exact basis vectors, not just proportional.
    """
    cols = (lift(p3), lift(p4), lift(p1))
    m = tuple(tuple(col[r] for col in cols) for r in range(3))
    if _det3(m, ctx.p) == 0:
        raise CollinearError(f"{p1}, {p3}, {p4} are collinear or not distinct")
    return ProjMap(ctx.p, _inv3(m, ctx.p))


def apply_map(m: ProjMap, pt: AnyPoint) -> ProjPoint:
    return _canonical_proj(m.p, *m.apply_vector(lift(pt)))


def all_points(ctx: PlaneContext) -> list[AffinePoint]:
    return [AffinePoint(x, y) for x in range(ctx.p) for y in range(ctx.p)]


def all_lines(ctx: PlaneContext) -> list[AffLine]:
    """All p^2 + p affine lines, in canonical order."""
    p = ctx.p
    lines = [AffLine(0, 1, c) for c in range(p)]
    lines += [AffLine(1, b, c) for b in range(p) for c in range(p)]
    return lines
