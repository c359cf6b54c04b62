"""Partial sum-product machinery over F_p.

A ``GridInstance`` is a bipartite edge set G between A and B; partial sets
A -G B, A /G B evaluate an operation on the edges of G only. The reduction
turns a four-apex point configuration into such a grid via a projective
map; the remaining routines run the Balog-Szemeredi-Gowers style refinements
constructively and report every asymptotic conclusion as an exact ratio.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import (
    DataError,
    DensityError,
    DivisionByZeroEdgeError,
    EmptySetError,
    InvariantViolation,
    LambdaDegenerateError,
    NoSelectionError,
    NonAffineImageError,
)
from .field import (
    AnyPoint,
    PlaneContext,
    ProjMap,
    X_DIRECTION,
    Y_DIRECTION,
    apply_map,
    build_tau,
    join,
)

# |G|^55 << |A|^36 |B|^37 |A -G B|^28 |A /G B|^8
PARTIAL_SUMPROD_EXPONENTS = {"G": 55, "A": 36, "B": 37, "diff": 28, "ratio": 8}

DEFAULT_EPS = Fraction(1, 100)


def as_fraction(eps) -> Fraction:
    """Exact value of a user-supplied epsilon; floats go through their repr,
    so 0.01 becomes 1/100 rather than the nearest binary fraction."""
    if isinstance(eps, Fraction):
        return eps
    if isinstance(eps, float):
        return Fraction(repr(eps))
    return Fraction(eps)


class GridInstance:
    """Edge set G inside A x B over F_p, with neighbourhoods N(a)."""

    __slots__ = ("p", "A", "B", "G", "scale", "N")

    def __init__(self, p: int, A: Iterable[int], B: Iterable[int], G: Iterable, scale=None):
        self.p = p
        self.A = tuple(sorted({a % p for a in A}))
        self.B = tuple(sorted({b % p for b in B}))
        edges = [(a % p, b % p) for a, b in G]
        if len(set(edges)) != len(edges):
            raise DataError("duplicate edges in G")
        sa, sb = set(self.A), set(self.B)
        stray = [e for e in edges if e[0] not in sa or e[1] not in sb]
        if stray:
            raise DataError(f"edges with endpoints outside A x B: {stray[:5]}")
        self.G = tuple(sorted(edges))
        self.scale = None if scale is None else scale % p
        self.N = {a: frozenset() for a in self.A}
        for a, b in self.G:
            self.N[a] = self.N[a] | {b}

    @classmethod
    def complete(cls, p: int, A: Iterable[int], B: Iterable[int] | None = None) -> "GridInstance":
        A = [a % p for a in A]
        B = A if B is None else [b % p for b in B]
        return cls(p, A, B, [(a, b) for a in set(A) for b in set(B)])

    @classmethod
    def from_edges(cls, p: int, G: Iterable, scale=None) -> "GridInstance":
        G = [(a % p, b % p) for a, b in G]
        return cls(p, {a for a, _ in G}, {b for _, b in G}, G, scale)

    def __len__(self):
        return len(self.G)

    def __eq__(self, other):
        return isinstance(other, GridInstance) and (
            (self.p, self.A, self.B, self.G, self.scale)
            == (other.p, other.A, other.B, other.G, other.scale)
        )

    def __repr__(self):
        return f"GridInstance(p={self.p}, |A|={len(self.A)}, |B|={len(self.B)}, |G|={len(self.G)})"

    def to_json(self) -> dict:
        d = {"p": self.p, "A": list(self.A), "B": list(self.B), "G": [list(e) for e in self.G]}
        if self.scale is not None:
            d["lambda"] = self.scale
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GridInstance":
        try:
            p = int(d["p"])
            PlaneContext(p)
            return cls(p, d["A"], d["B"], [tuple(e) for e in d["G"]], d.get("lambda"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"malformed grid: {exc}") from None


def load_grid(path) -> GridInstance:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
    return GridInstance.from_json(d)


def save_grid(path, g: GridInstance):
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh)
        fh.write("\n")


def _combine(op: str, a: int, b: int, p: int) -> int:
    if op == "+":
        return (a + b) % p
    if op == "-":
        return (a - b) % p
    if op == "*":
        return a * b % p
    return a * pow(b, -1, p) % p


def partial_set(g: GridInstance, op: str) -> frozenset:
    """{a op b : (a, b) in G} for op in + - * /."""
    return edge_set(g.p, g.G, op)


def edge_set(p: int, edges: Iterable, op: str) -> frozenset:
    if op not in ("+", "-", "*", "/"):
        raise DataError(f"unknown operation {op!r}")
    edges = list(edges)
    if op == "/":
        bad = [e for e in edges if e[1] % p == 0]
        if bad:
            raise DivisionByZeroEdgeError(bad)
    return frozenset(_combine(op, a, b, p) for a, b in edges)


def ratio_set(p: int, edges: Iterable) -> tuple[frozenset, int]:
    """Partial ratio set over the edges where it is defined, plus the number
    of skipped edges (second coordinate zero)."""
    edges = list(edges)
    good = [(a, b) for a, b in edges if b % p]
    return edge_set(p, good, "/"), len(edges) - len(good)


def difference_set(p: int, A: Iterable[int], C: Iterable[int]) -> frozenset:
    C = list(C)
    return frozenset((a - c) % p for a in A for c in C)


# -- multiplicative energy -------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    energy: int
    method: str
    histogram: dict  # x -> #{(a, b) in A x A : a*b = x}


def product_histogram(A: Iterable[int], p: int) -> dict:
    A = sorted({a % p for a in A})
    return dict(sorted(Counter(a * b % p for a in A for b in A).items()))


def mult_energy(A: Iterable[int], p: int, method: str = "bucket") -> EnergyReport:
    """Number of ordered quadruples (a, b, c, d) in A^4 with ab = cd.

    Zero is allowed in A; zero products share the r(0) bucket.
    """
    A = sorted({a % p for a in A})
    if not A:
        raise EmptySetError("energy of the empty set")
    hist = product_histogram(A, p)
    if method == "bucket":
        energy = sum(r * r for r in hist.values())
    elif method == "brute":
        energy = 0
        for a in A:
            for b in A:
                ab = a * b
                for c in A:
                    for d in A:
                        if (ab - c * d) % p == 0:
                            energy += 1
    else:
        raise DataError(f"unknown method {method!r}")
    return EnergyReport(energy, method, hist)


# -- projective reduction --------------------------------------------------


@dataclass(frozen=True)
class ReductionOutput:
    grid: GridInstance  # (A, B', G') with B' = scale * B
    unscaled: GridInstance  # (A, B, G), G = tau(R)
    tau: ProjMap
    pencil: int  # lambda: lines through tau(p2) are a + lambda*b = const
    bounds: dict  # K1..K4, goodness of the stripped R at p1..p4
    sizes: dict  # |G|, |A|, |B|, |A -G B'|, ratio directions
    checks: dict  # name -> bool, all must hold
    labelings: dict
    source: object = field(default=None, repr=False)


def goodness(ctx: PlaneContext, apex: AnyPoint, points: Iterable) -> int:
    """Number of distinct lines joining apex to the given points (apex may be
    a point at infinity)."""
    return len({join(ctx, apex, pt) for pt in points})


def reduce_points(ctx: PlaneContext, R, p1: AnyPoint, p2: AnyPoint, p3: AnyPoint, p4: AnyPoint,
                  source=None) -> ReductionOutput:
    """Map R to a grid: tau sends p1 to the origin, p3 to the vertical
    direction and p4 to the horizontal direction, so x-coordinates index
    lines through p3 and y-coordinates lines through p4."""
    p = ctx.p
    R = list(R)
    tau = build_tau(ctx, p1, p4, p3)
    images = []
    for pt in R:
        img = apply_map(tau, pt)
        if not img.is_affine:
            raise NonAffineImageError(f"{tuple(pt)} lies on the line through p3 and p4")
        images.append((img.X, img.Y))
    t2 = apply_map(tau, p2)
    if t2.Z != 0:
        raise LambdaDegenerateError("p2 is not on the line through p3 and p4")
    if t2 in (X_DIRECTION, Y_DIRECTION):
        raise LambdaDegenerateError("p2 coincides with p3 or p4")
    # t2 = [u:1:0]; the pencil through it is a - u*b = const
    u = t2.X
    pencil = -u % p
    unscaled = GridInstance.from_edges(p, images)
    grid = GridInstance.from_edges(p, [(a, u * b % p) for a, b in images], scale=u)

    K = {
        "K1": goodness(ctx, p1, R),
        "K2": goodness(ctx, p2, R),
        "K3": goodness(ctx, p3, R),
        "K4": goodness(ctx, p4, R),
    }
    diff = edge_set(p, grid.G, "-")
    ratios, skipped = ratio_set(p, grid.G)
    directions = len(ratios) + (1 if skipped else 0)
    sizes = {
        "R": len(R),
        "G": len(grid.G),
        "A": len(grid.A),
        "B": len(grid.B),
        "diff": len(diff),
        "ratio": len(ratios),
        "ratio_directions": directions,
        "zero_b_edges": skipped,
    }
    checks = {
        "injective": len(grid.G) == len(R) == len(set(images)),
        "A_le_K3": len(grid.A) <= K["K3"],
        "B_le_K4": len(grid.B) <= K["K4"],
        "diff_le_K2": len(diff) <= K["K2"],
        "ratio_le_K1": directions <= K["K1"],
    }
    labelings = {
        # as stated: |A -G B| <= K2 and |A /G B| <= K1
        "statement": checks["diff_le_K2"] and checks["ratio_le_K1"],
        # as concluded at the end of the argument: |A -G' B'| <= K1, |A /G B'| <= K2
        "proof": len(diff) <= K["K1"] and directions <= K["K2"],
    }
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise InvariantViolation(f"reduction violated {failed}: sizes={sizes} bounds={K}")
    return ReductionOutput(grid, unscaled, tau, pencil, K, sizes, checks, labelings, source)


def reduce_to_grid(r, ctx: PlaneContext | None = None) -> ReductionOutput:
    """Reduce an RConfig whose R already avoids l*."""
    ctx = ctx or PlaneContext(r.R.p)
    return reduce_points(ctx, r.R, r.p1, r.p2, r.p3, r.p4, source=r)


# -- popular pairs and refined graphs ---------------------------------------


@dataclass(frozen=True)
class PopularSubset:
    members: tuple
    threshold: int  # t: at least (1-eps)|A'|^2 ordered pairs have codegree >= t
    fraction: Fraction  # share of ordered pairs with codegree >= t
    threshold_ratio: Fraction  # t |A|^2 |B| / |G|^2
    size_ratio: Fraction  # |A'| |B| / |G|


def _codegrees(g: GridInstance, members) -> list:
    N = g.N
    return [len(N[a1] & N[a2]) for a1 in members for a2 in members]


def select_popular_subset(g: GridInstance, eps=DEFAULT_EPS) -> PopularSubset:
    """Choose A' among the neighbourhoods {a : b in N(a)} and the
    high-degree rows, maximizing |A'| subject to (1-eps)|A'|^2 ordered pairs
    sharing at least t >= 1 common neighbours."""
    eps = as_fraction(eps)
    if not 0 < eps < 1:
        raise DataError(f"eps must lie in (0, 1), got {eps}")
    if not g.G:
        raise EmptySetError("G has no edges")
    nA, nB, nG = len(g.A), len(g.B), len(g.G)
    candidates = {tuple(sorted(a for a in g.A if b in g.N[a])) for b in g.B}
    candidates.add(tuple(a for a in g.A if 2 * nA * len(g.N[a]) >= nG))
    candidates.discard(())
    supported = sum(1 for a in g.A if g.N[a])
    min_size = min(2, supported)

    best, best_key, best_fraction = None, None, Fraction(0)
    for cand in sorted(candidates):
        if len(cand) < min_size:
            continue
        codeg = sorted(_codegrees(g, cand), reverse=True)
        need = math.ceil((1 - eps) * len(codeg))
        t = codeg[need - 1]
        best_fraction = max(best_fraction, Fraction(sum(1 for c in codeg if c >= 1), len(codeg)))
        if t < 1:
            continue
        key = (len(cand), t)
        if best_key is None or key > best_key:
            best, best_key = (cand, t, codeg), key
    if best is None:
        raise NoSelectionError(
            f"no candidate of size >= {min_size} has a (1 - {eps}) share of pairs with a "
            f"common neighbour; best share {best_fraction}",
            best_fraction,
        )
    cand, t, codeg = best
    fraction = Fraction(sum(1 for c in codeg if c >= t), len(codeg))
    return PopularSubset(
        cand, t, fraction, Fraction(t * nA * nA * nB, nG * nG), Fraction(len(cand) * nB, nG)
    )


@dataclass(frozen=True)
class RefinedGraph:
    members: tuple  # A'
    H: tuple  # ordered pairs of A' with codegree >= t
    threshold: int
    diff_set: frozenset  # A' -H A'
    ratio_set: frozenset  # A' /H A' over pairs with nonzero second entry
    diff_ratio: Fraction  # |A' -H A'| |G|^2 / (|A -G B|^2 |A|^2 |B|)
    ratio_ratio: Fraction | None
    selection: PopularSubset


def build_refined_graph(g: GridInstance, eps=DEFAULT_EPS) -> RefinedGraph:
    eps = as_fraction(eps)
    sel = select_popular_subset(g, eps)
    t, A1, p = sel.threshold, sel.members, g.p
    H = tuple((a1, a2) for a1 in A1 for a2 in A1 if len(g.N[a1] & g.N[a2]) >= t)
    if len(H) < (1 - eps) * len(A1) ** 2:
        raise InvariantViolation(f"|H| = {len(H)} below (1 - eps)|A'|^2")
    diffs = edge_set(p, H, "-")
    ratios, _ = ratio_set(p, H)

    gdiff = edge_set(p, g.G, "-")
    gratio, _ = ratio_set(p, g.G)
    # injection (x, b) -> (a1(x) - b, a2(x) - b) into (A -G B)^2
    if len(diffs) * t > len(gdiff) ** 2:
        raise InvariantViolation("difference injection bound failed")
    if 0 not in g.B and len(ratios) * t > len(gratio) ** 2:
        raise InvariantViolation("ratio injection bound failed")

    nA, nB, nG = len(g.A), len(g.B), len(g.G)
    diff_ratio = Fraction(len(diffs) * nG * nG, len(gdiff) ** 2 * nA * nA * nB)
    ratio_ratio = None
    if gratio:
        ratio_ratio = Fraction(len(ratios) * nG * nG, len(gratio) ** 2 * nA * nA * nB)
    return RefinedGraph(A1, H, t, diffs, ratios, diff_ratio, ratio_ratio, sel)


def _sqrt_floor_holds(whole: int, part: int, eps: Fraction, mult: int = 1) -> bool:
    """part >= (1 - mult*sqrt(eps)) * whole, decided exactly."""
    gap = whole - part
    return gap <= 0 or gap * gap <= mult * mult * eps * whole * whole


@dataclass(frozen=True)
class RegularizedDiff:
    A1: tuple
    C1: tuple
    diff_set: frozenset  # A' - C'
    ratio: Fraction  # |A' - C'| |B| / (|A -G B| |B -H C|)
    min_common: int  # smallest |B_ac| among the representative pairs


def regularize_diff(A, B, C, G, H, eps, p: int) -> RegularizedDiff:
    """Rows of G and columns of H with degree >= (1 - sqrt(eps))|B|."""
    eps = as_fraction(eps)
    A, B, C = sorted(set(A)), sorted(set(B)), sorted(set(C))
    G, H = set(G), set(H)
    if not 0 < eps < Fraction(1, 4):
        raise DensityError(f"eps must lie in (0, 1/4), got {eps}")
    if len(G) < (1 - eps) * len(A) * len(B) or len(H) < (1 - eps) * len(B) * len(C):
        raise DensityError("G or H is below the (1 - eps) density threshold")
    nB = len(B)
    rows = {a: set() for a in A}
    for a, b in G:
        rows[a].add(b)
    cols = {c: set() for c in C}
    for b, c in H:
        cols[c].add(b)
    A1 = tuple(a for a in A if _sqrt_floor_holds(nB, len(rows[a]), eps))
    C1 = tuple(c for c in C if _sqrt_floor_holds(nB, len(cols[c]), eps))
    if not _sqrt_floor_holds(len(A), len(A1), eps) or not _sqrt_floor_holds(len(C), len(C1), eps):
        raise InvariantViolation("regularized rows or columns fell below (1 - sqrt(eps))")

    reps = {}
    for a in A1:
        for c in C1:
            reps.setdefault((a - c) % p, (a, c))
    common = [len(rows[a] & cols[c]) for a, c in reps.values()]
    if any(not _sqrt_floor_holds(nB, n, eps, mult=2) for n in common):
        raise InvariantViolation("a pair (a, c) has fewer than (1 - 2 sqrt(eps))|B| common b")
    gdiff = edge_set(p, G, "-")
    hdiff = edge_set(p, H, "-")
    # injection (x, b) -> (a(x) - b, b - c(x))
    if sum(common) > len(gdiff) * len(hdiff):
        raise InvariantViolation("difference injection bound failed")
    diffs = frozenset(reps)
    ratio = Fraction(len(diffs) * nB, len(gdiff) * len(hdiff)) if gdiff and hdiff else None
    return RegularizedDiff(A1, C1, diffs, ratio, min(common, default=0))


@dataclass(frozen=True)
class DenseDiff:
    members: tuple  # A' = A1 & C1
    diff_set: frozenset
    ratio: Fraction  # |A' - A'| |A| / |A -G A|^2
    regularized: RegularizedDiff


def dense_diff_refine(A, G, eps, p: int) -> DenseDiff:
    eps = as_fraction(eps)
    A = sorted(set(A))
    reg = regularize_diff(A, A, A, G, G, eps, p)
    members = tuple(sorted(set(reg.A1) & set(reg.C1)))
    if not _sqrt_floor_holds(len(A), len(members), eps, mult=2):
        raise InvariantViolation("intersection fell below (1 - 2 sqrt(eps))|A|")
    diffs = difference_set(p, members, members)
    gdiff = edge_set(p, G, "-")
    return DenseDiff(members, diffs, Fraction(len(diffs) * len(A), len(gdiff) ** 2), reg)


@dataclass(frozen=True)
class HalfBSG:
    members: tuple  # A''
    refined: RefinedGraph
    dense: DenseDiff
    H_restricted: tuple  # H' = H & (A'' x A'')
    diff_size: int  # |A'' - A''|
    diff_ceiling: Fraction  # |A -G B|^4 |A|^4 |B|^3 / |G|^5
    diff_report: Fraction  # diff_size / diff_ceiling
    energy: EnergyReport  # of A''
    energy_floor: Fraction  # |G|^6 / (|B|^5 |A|^2 |A /G B|^2)
    energy_report: Fraction  # energy / energy_floor
    cs_bound: Fraction  # |H'|^2 / |A'' /H' A''|


def half_bsg(g: GridInstance, eps=DEFAULT_EPS) -> HalfBSG:
    eps = as_fraction(eps)
    if not 0 < eps < Fraction(1, 16):
        raise DataError(f"eps must lie in (0, 1/16), got {eps}")
    if not g.G:
        raise EmptySetError("G has no edges")
    p = g.p
    gdiff = edge_set(p, g.G, "-")
    gratio, _ = ratio_set(p, g.G)
    if not gratio:
        raise EmptySetError("A /G B is empty: every edge has b = 0")

    refined = build_refined_graph(g, eps)
    dense = dense_diff_refine(refined.members, refined.H, eps, p)
    A2 = set(dense.members)
    H2 = tuple(e for e in refined.H if e[0] in A2 and e[1] in A2)
    defined = [e for e in H2 if e[1] % p]
    ratios = edge_set(p, defined, "/")
    if not ratios:
        raise EmptySetError("A'' /H' A'' is empty")
    energy = mult_energy(dense.members, p)
    cs_bound = Fraction(len(defined) ** 2, len(ratios))
    if energy.energy < cs_bound:
        raise InvariantViolation(f"E(A'') = {energy.energy} below |H'|^2 / |A'' /H' A''| = {cs_bound}")

    nA, nB, nG = len(g.A), len(g.B), len(g.G)
    diff_size = len(dense.diff_set)
    ceiling = Fraction(len(gdiff) ** 4 * nA**4 * nB**3, nG**5)
    floor = Fraction(nG**6, nB**5 * nA**2 * len(gratio) ** 2)
    return HalfBSG(
        dense.members, refined, dense, H2, diff_size, ceiling, diff_size / ceiling,
        energy, floor, energy.energy / floor, cs_bound,
    )


# -- ratio checks ----------------------------------------------------------


@dataclass(frozen=True)
class RudnevReport:
    size: int
    energy: int
    diff_size: int
    ratio: Fraction  # E^4 / (|A - A|^7 |A|^4)
    warning: str | None = None


def check_rudnev(A: Iterable[int], p: int) -> RudnevReport:
    A = sorted({a % p for a in A})
    if not A:
        raise EmptySetError("check_rudnev needs a nonempty set")
    warning = None
    if len(A) ** 2 >= p:
        warning = f"|A| = {len(A)} is not below sqrt(p) = {math.sqrt(p):.2f}"
        warnings.warn(warning, stacklevel=2)
    E = mult_energy(A, p).energy
    D = len(difference_set(p, A, A))
    n = len(A)
    return RudnevReport(n, E, D, Fraction(E**4, D**7 * n**4), warning)


@dataclass(frozen=True)
class PartialSumProdReport:
    G: int
    A: int
    B: int
    diff: int
    ratio_size: int
    skipped_edges: int  # edges with b = 0, where a / b is undefined
    ratio: Fraction  # |G|^55 / (|A|^36 |B|^37 |A -G B|^28 |A /G B|^8)
    warning: str | None = None


def check_partial_sumprod(g: GridInstance) -> PartialSumProdReport:
    if not g.G:
        raise EmptySetError("G has no edges")
    ratios, skipped = ratio_set(g.p, g.G)
    if not ratios:
        raise EmptySetError("A /G B is undefined on every edge")
    warning = None
    if len(g.G) > g.p * len(g.B):
        warning = f"|G| = {len(g.G)} exceeds p|B| = {g.p * len(g.B)}"
        warnings.warn(warning, stacklevel=2)
    diff = len(edge_set(g.p, g.G, "-"))
    e = PARTIAL_SUMPROD_EXPONENTS
    nG, nA, nB, nR = len(g.G), len(g.A), len(g.B), len(ratios)
    ratio = Fraction(nG ** e["G"], nA ** e["A"] * nB ** e["B"] * diff ** e["diff"] * nR ** e["ratio"])
    return PartialSumProdReport(nG, nA, nB, diff, nR, skipped, ratio, warning)
