"""Constructive point/line refinements and the two configuration searches.

Every routine returns the realized sizes next to the ratio against the
size the asymptotic argument promises. Constant-free steps (the halving
bounds, the Cauchy-Schwarz step of the pair scan) are checked exactly and
raise ``InvariantViolation`` if they ever fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    ApexError,
    DegreeClassError,
    EmptyIncidenceError,
    EmptyRError,
    InvariantViolation,
    NoCandidateError,
    NoValidLineError,
    TooFewPointsError,
)
from .field import AffinePoint, AffLine, PlaneContext, incident, line_through
from .incidence import LineSet, PointSet, count_incidences


def refine_popular_points(P: PointSet, L: LineSet) -> PointSet:
    """Points on at least I(P,L) / (2|P|) lines; keeps half the incidences."""
    prof = count_incidences(P, L)
    if prof.total == 0:
        raise EmptyIncidenceError("refinement needs I(P,L) > 0")
    keep = [pt for pt, d in prof.degree.items() if 2 * len(P) * d >= prof.total]
    kept = sum(prof.degree[pt] for pt in keep)
    if 2 * kept < prof.total:
        raise InvariantViolation(f"popular points kept {kept} of {prof.total} incidences")
    return P.subset(keep)


def refine_popular_lines(P: PointSet, L: LineSet) -> LineSet:
    """Lines through at least I(P,L) / (2|L|) points; keeps half the incidences."""
    prof = count_incidences(P, L)
    if prof.total == 0:
        raise EmptyIncidenceError("refinement needs I(P,L) > 0")
    keep = [l for l, m in prof.richness.items() if 2 * len(L) * m >= prof.total]
    kept = sum(prof.richness[l] for l in keep)
    if 2 * kept < prof.total:
        raise InvariantViolation(f"popular lines kept {kept} of {prof.total} incidences")
    return L.subset(keep)


def refine_bounded_points(P: PointSet, L: LineSet) -> PointSet:
    """Points on at most max{4, 4|L|^2 / I} lines; keeps half the incidences."""
    prof = count_incidences(P, L)
    I = prof.total
    if I == 0:
        raise EmptyIncidenceError("refinement needs I(P,L) > 0")
    cap = 4 * len(L) ** 2
    keep = [pt for pt, d in prof.degree.items() if d <= 4 or d * I <= cap]
    kept = sum(prof.degree[pt] for pt in keep)
    if 2 * kept < I:
        raise InvariantViolation(f"bounded points kept {kept} of {I} incidences")
    return P.subset(keep)


def refine_bounded_lines(P: PointSet, L: LineSet) -> LineSet:
    """Lines through at most max{4, 4|P|^2 / I} points; keeps half the incidences."""
    prof = count_incidences(P, L)
    I = prof.total
    if I == 0:
        raise EmptyIncidenceError("refinement needs I(P,L) > 0")
    cap = 4 * len(P) ** 2
    keep = [l for l, m in prof.richness.items() if m <= 4 or m * I <= cap]
    kept = sum(prof.richness[l] for l in keep)
    if 2 * kept < I:
        raise InvariantViolation(f"bounded lines kept {kept} of {I} incidences")
    return L.subset(keep)


def cover_set(P: PointSet, L: LineSet, apex: AffinePoint) -> PointSet:
    """Points q != apex of P whose line to apex belongs to L."""
    if apex not in P:
        raise ApexError(f"apex {tuple(apex)} is not in P")
    ctx = PlaneContext(P.p)
    return P.subset(q for q in P if q != apex and line_through(ctx, apex, q) in L)


def cover_sets(P: PointSet, L: LineSet) -> dict:
    """cover_set for every point of P at once, as frozensets."""
    ctx = PlaneContext(P.p)
    covers = {pt: set() for pt in P}
    pts = P.points
    for i, u in enumerate(pts):
        for v in pts[i + 1:]:
            if line_through(ctx, u, v) in L:
                covers[u].add(v)
                covers[v].add(u)
    return {pt: frozenset(s) for pt, s in covers.items()}


def _check_degree_class(P: PointSet, L: LineSet, K: int):
    prof = count_incidences(P, L)
    bad = [pt for pt, d in prof.degree.items() if not K <= d < 2 * K]
    if bad:
        raise DegreeClassError(
            f"{len(bad)} points have degree outside [{K}, {2 * K}), e.g. {tuple(bad[0])} "
            f"with degree {prof.degree[bad[0]]}"
        )
    return prof


@dataclass(frozen=True)
class CoverBase:
    points: PointSet
    threshold: int  # min |P_p| over the kept points
    ratio: Fraction  # threshold * |L| / (K^2 |P|)
    popular_lines: LineSet


def find_popular_cover_base(P: PointSet, L: LineSet, K: int) -> CoverBase:
    """Refine lines by popularity, then points against those lines.

    Exactly, I(P1, L1) >= I(P, L) / 4 >= K|P| / 4 while every degree is
    below 2K, so |P1| > |P| / 8 always.
    """
    _check_degree_class(P, L, K)
    L1 = refine_popular_lines(P, L)
    P1 = refine_popular_points(P, L1)
    if 8 * len(P1) <= len(P):
        raise InvariantViolation(f"cover base kept {len(P1)} of {len(P)} points")
    covers = cover_sets(P, L)
    t = min(len(covers[pt]) for pt in P1)
    return CoverBase(P1, t, Fraction(t * len(L), K * K * len(P)), L1)


@dataclass(frozen=True)
class GoodnessCertificate:
    apex: AffinePoint
    K: int
    lines: LineSet
    covered: PointSet
    groups: dict = field(repr=False)  # line -> tuple of covered points on it

    def validate(self) -> bool:
        ctx = PlaneContext(self.covered.p)
        if self.K != len(self.lines) or set(self.groups) != set(self.lines):
            return False
        if any(not incident(ctx, self.apex, l) for l in self.lines):
            return False
        seen = [q for pts in self.groups.values() for q in pts]
        if sorted(seen) != list(self.covered.points):
            return False
        return all(incident(ctx, q, l) for l, pts in self.groups.items() for q in pts)


def is_k_good(S: PointSet, apex: AffinePoint) -> GoodnessCertificate:
    """The least K for which (S, apex) is K-good, with its supporting lines."""
    if apex in S:
        raise ApexError(f"apex {tuple(apex)} belongs to the point set")
    ctx = PlaneContext(S.p)
    groups = {}
    for q in S:
        groups.setdefault(line_through(ctx, apex, q), []).append(q)
    lines = LineSet._trusted(S.p, groups)
    return GoodnessCertificate(
        apex, len(lines), lines, S, {l: tuple(pts) for l, pts in sorted(groups.items())}
    )


@dataclass(frozen=True)
class QConfig:
    p1: AffinePoint
    p2: AffinePoint
    Q: PointSet
    cert1: GoodnessCertificate
    cert2: GoodnessCertificate
    ratio: Fraction  # |Q| |L|^2 / (K^4 |P|)
    cover_size: int  # |P_{p1}|


def find_q_config(P: PointSet, L: LineSet, K: int) -> QConfig:
    """Greedy search for p1, p2 and Q = P_{p1} & P_{p2}."""
    if len(P) < 2:
        raise TooFewPointsError(f"need at least 2 points, got {len(P)}")
    _check_degree_class(P, L, K)
    covers = cover_sets(P, L)
    # max over sorted points keeps the first (smallest) on ties
    p1 = max(P.points, key=lambda pt: len(covers[pt]))
    cover1 = covers[p1]
    if len(cover1) < 2:
        raise NoCandidateError("every covering set P_p has fewer than 2 points")
    p2 = max(sorted(cover1), key=lambda pt: len(cover1 & covers[pt]))
    Q = P.subset(cover1 & covers[p2])
    if not len(Q):
        raise NoCandidateError(f"P_p1 and P_p2 are disjoint for p1={tuple(p1)}, p2={tuple(p2)}")
    cert1, cert2 = is_k_good(Q, p1), is_k_good(Q, p2)
    for cert in (cert1, cert2):
        if any(l not in L for l in cert.lines) or cert.K >= 2 * K:
            raise InvariantViolation(f"certificate at {tuple(cert.apex)} is not supported on L")
    ratio = Fraction(len(Q) * len(L) ** 2, K**4 * len(P))
    return QConfig(p1, p2, Q, cert1, cert2, ratio, len(cover1))


@dataclass(frozen=True)
class RConfig:
    q: QConfig
    p3: AffinePoint
    p4: AffinePoint
    line: AffLine  # l*, through p2, p3, p4 and missing p1
    R: PointSet
    cert3: GoodnessCertificate
    cert4: GoodnessCertificate
    ratio: Fraction  # |R| |L|^4 / (K^8 |P|)
    stats: dict

    @property
    def p1(self):
        return self.q.p1

    @property
    def p2(self):
        return self.q.p2


def find_r_config(q: QConfig, P: PointSet, L: LineSet, K: int) -> RConfig:
    """Greedy search for l*, p3, p4 and R = Q_{p3} & Q_{p4} inside Q."""
    ctx = PlaneContext(P.p)
    Q = q.Q
    stats = {}

    # per-line cap: supporting lines through p1, p2 should hold <= |P|/K points of Q
    cap = max(len(pts) for cert in (q.cert1, q.cert2) for pts in cert.groups.values())
    stats["max_supporting_line_load"] = cap
    stats["cap_ratio"] = Fraction(cap * K, len(P))
    stats["cap_ok"] = cap * K <= len(P)

    base = find_popular_cover_base(Q, L, K)
    Q1 = base.points
    stats["Q1"] = len(Q1)
    stats["cover_threshold"] = base.threshold
    J = is_k_good(Q1, q.p2).lines
    J1 = refine_popular_lines(Q1, J)
    stats["J"] = len(J)
    stats["J1"] = len(J1)
    candidates = [l for l in J1 if not incident(ctx, q.p1, l)]
    if not candidates:
        raise NoValidLineError("every popular supporting line through p2 also passes through p1")
    on_line = {l: [pt for pt in Q if incident(ctx, pt, l)] for l in candidates}
    line = max(candidates, key=lambda l: len(on_line[l]))
    row = on_line[line]
    stats["Q_on_line"] = len(row)
    if len(row) < 2:
        raise EmptyRError(f"l* = {tuple(line)} meets Q in fewer than 2 points")

    covers = cover_sets(Q, L)
    diag = sum(len(covers[pt]) for pt in row)
    off = 0
    best, best_pair = -1, None
    for i, u in enumerate(row):
        for v in row[i + 1:]:
            n = len(covers[u] & covers[v])
            off += 2 * n
            if n > best:
                best, best_pair = n, (u, v)
    # sum_p |Q_p| <= |Q|^(1/2) (sum_{p3,p4} |Q_p3 & Q_p4|)^(1/2)
    if diag * diag > len(Q) * (diag + off):
        raise InvariantViolation("Cauchy-Schwarz step of the pair scan failed")
    stats["diagonal_sum"] = diag
    stats["off_diagonal_sum"] = off
    stats["dominant_term"] = "diagonal" if diag >= off else "off-diagonal"

    p3, p4 = best_pair
    R = Q.subset(covers[p3] & covers[p4])
    if not len(R):
        raise EmptyRError(f"Q_p3 and Q_p4 are disjoint on l* = {tuple(line)}")
    ratio = Fraction(len(R) * len(L) ** 4, K**8 * len(P))
    return RConfig(q, p3, p4, line, R, is_k_good(R, p3), is_k_good(R, p4), ratio, stats)
