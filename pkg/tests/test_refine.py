import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from fpinc.errors import (
    ApexError,
    DegreeClassError,
    EmptyIncidenceError,
    EmptyRError,
    NoCandidateError,
    NoValidLineError,
)
from fpinc.field import AffinePoint, PlaneContext, incident, line_through
from fpinc.incidence import LineSet, PointSet, count_incidences
from fpinc.refine import (
    QConfig,
    cover_set,
    cover_sets,
    find_popular_cover_base,
    find_q_config,
    find_r_config,
    is_k_good,
    refine_bounded_lines,
    refine_bounded_points,
    refine_popular_lines,
    refine_popular_points,
)

from conftest import brute_incidences, random_instance


# -- halving refinements ------------------------------------------------------


def test_regular_instance_is_fixed(full_plane):
    P, L = full_plane(2)
    assert refine_popular_points(P, L) == P
    assert refine_popular_lines(P, L) == L
    assert refine_bounded_points(P, L) == P
    assert refine_bounded_lines(P, L) == L


def test_isolated_point_dropped():
    P = PointSet(5, [(0, 0), (1, 0), (2, 0), (3, 3)])
    L = LineSet(5, [(0, 1, 0)])
    assert refine_popular_points(P, L) == PointSet(5, [(0, 0), (1, 0), (2, 0)])


def test_single_point_on_five_lines_kept():
    P = PointSet(7, [(0, 0)])
    L = LineSet(7, [(1, s, 0) for s in range(4)] + [(0, 1, 0)])
    assert count_incidences(P, L).total == 5
    assert refine_bounded_points(P, L) == P


def test_bounded_drops_overloaded_point():
    # the whole plane against the pencil through the origin: the origin has
    # degree 8 > max{4, 4 * 8^2 / 56}, every other point degree 1
    p = 7
    ctx = PlaneContext(p)
    hub = AffinePoint(0, 0)
    P = PointSet(p, itertools.product(range(p), repeat=2))
    L = LineSet(p, [line_through(ctx, hub, (1, s)) for s in range(p)] + [line_through(ctx, hub, (0, 1))])
    assert count_incidences(P, L).total == 56
    assert set(refine_bounded_points(P, L)) == set(P) - {hub}


def test_refinements_require_incidences():
    P, L = PointSet(5, [(0, 0)]), LineSet(5, [(1, 0, 1)])
    for fn in (refine_popular_points, refine_popular_lines, refine_bounded_points, refine_bounded_lines):
        with pytest.raises(EmptyIncidenceError):
            fn(P, L)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_halving_with_oracle_recount(seed):
    rng = random.Random(seed)
    p = rng.choice([3, 5, 7, 11, 13])
    P, L = random_instance(rng, p, rng.randint(1, 50), rng.randint(1, 50))
    I = brute_incidences(P, L)
    if I == 0:
        return
    for refined in (refine_popular_points(P, L), refine_bounded_points(P, L)):
        assert set(refined) <= set(P)
        assert 2 * brute_incidences(refined, L) >= I
    for refined in (refine_popular_lines(P, L), refine_bounded_lines(P, L)):
        assert set(refined) <= set(L)
        assert 2 * brute_incidences(P, refined) >= I


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_refinement_thresholds(seed):
    rng = random.Random(seed)
    p = rng.choice([5, 7, 11])
    P, L = random_instance(rng, p, rng.randint(1, 40), rng.randint(1, 40))
    prof = count_incidences(P, L)
    I = prof.total
    if I == 0:
        return
    kept = set(refine_popular_points(P, L))
    for pt, d in prof.degree.items():
        assert (pt in kept) == (2 * len(P) * d >= I)
    kept = set(refine_bounded_lines(P, L))
    for l, m in prof.richness.items():
        assert (l in kept) == (m <= 4 or m * I <= 4 * len(P) ** 2)


# -- covering sets and goodness -------------------------------------------------


def test_cover_set_examples(full_plane):
    P, L = full_plane(2)
    for apex in P:
        assert set(cover_set(P, L, apex)) == set(P) - {apex}
    assert len(cover_set(P, LineSet(2), AffinePoint(0, 0))) == 0

    grid = PointSet(7, itertools.product(range(3), repeat=2))
    axes = LineSet(7, [(1, 0, c) for c in range(7)] + [(0, 1, c) for c in range(7)])
    expected = set()
    for q in grid:
        if q != (0, 0) and (q[0] == 0 or q[1] == 0):
            expected.add(q)
    assert expected == {(1, 0), (2, 0), (0, 1), (0, 2)}
    assert set(cover_set(grid, axes, AffinePoint(0, 0))) == expected


def test_cover_set_apex_must_be_in_P():
    with pytest.raises(ApexError):
        cover_set(PointSet(5, [(1, 1)]), LineSet(5), AffinePoint(0, 0))


def test_cover_sets_agree_with_cover_set():
    rng = random.Random(3)
    P, L = random_instance(rng, 11, 30, 40)
    covers = cover_sets(P, L)
    for apex in P:
        assert covers[apex] == frozenset(cover_set(P, L, apex))


def test_popular_cover_base_full_plane(full_plane):
    P, L = full_plane(3)
    base = find_popular_cover_base(P, L, 4)
    assert base.points == P and base.threshold == 8


def test_popular_cover_base_checks_degree_class(full_plane):
    P, L = full_plane(3)
    with pytest.raises(DegreeClassError):
        find_popular_cover_base(P, L, 2)


def test_popular_cover_base_excludes_weak_points():
    # grid points covered along axis lines only; the class K = 2 holds everywhere
    p = 11
    P = PointSet(p, itertools.product(range(4), repeat=2))
    L = LineSet(p, [(1, 0, c) for c in range(4)] + [(0, 1, c) for c in range(4)])
    base = find_popular_cover_base(P, L, 2)
    assert 8 * len(base.points) > len(P)
    assert base.threshold == 6


def test_is_k_good_examples():
    cert = is_k_good(PointSet(7, [(1, 1), (2, 2), (3, 3)]), AffinePoint(0, 0))
    assert cert.K == 1 and cert.validate()
    cert = is_k_good(PointSet(7, [(1, 0), (2, 0), (0, 1), (0, 2)]), AffinePoint(0, 0))
    assert cert.K == 2 and cert.validate()
    general = PointSet(7, [(1, s) for s in range(5)])
    cert = is_k_good(general, AffinePoint(0, 0))
    assert cert.K == len(general) and cert.validate()
    with pytest.raises(ApexError):
        is_k_good(PointSet(7, [(0, 0)]), AffinePoint(0, 0))


def _slope_count(apex, pts, p):
    # independent recount: distinct directions (dx : dy) from the apex
    dirs = set()
    for x, y in pts:
        dx, dy = (x - apex[0]) % p, (y - apex[1]) % p
        dirs.add((1, dy * pow(dx, -1, p) % p) if dx else (0, 1))
    return len(dirs)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_certificates_self_validate(seed):
    rng = random.Random(seed)
    p = rng.choice([5, 7, 11])
    cells = rng.sample(range(p * p), rng.randint(2, 20))
    S = PointSet(p, [divmod(v, p) for v in cells[1:]])
    apex = AffinePoint(*divmod(cells[0], p))
    cert = is_k_good(S, apex)
    assert cert.validate()
    assert cert.K == _slope_count(apex, S, p)
    assert is_k_good(cert.covered, apex).K == cert.K


# -- configuration searches ------------------------------------------------------


def test_q_config_full_plane(full_plane):
    P, L = full_plane(5)
    q = find_q_config(P, L, 6)
    assert q.p1 != q.p2
    for cert in (q.cert1, q.cert2):
        assert cert.validate() and cert.K <= 6
        assert cert.K == _slope_count(cert.apex, q.Q, 5)
        assert all(l in L for l in cert.lines)
    assert set(q.Q) == set(cover_set(P, L, q.p1)) & set(cover_set(P, L, q.p2))


def test_q_config_collinear():
    p = 11
    line = (1, 4, 3)
    pts = [(x, y) for x in range(p) for y in range(p) if (x + 4 * y - 3) % p == 0][:6]
    P, L = PointSet(p, pts), LineSet(p, [line])
    q = find_q_config(P, L, 1)
    ctx = PlaneContext(p)
    assert all(incident(ctx, pt, L.lines[0]) for pt in q.Q)
    assert q.cert1.K == 1 and q.cert2.K == 1


def test_q_config_without_covers():
    P = PointSet(7, [(0, 0), (1, 1)])
    L = LineSet(7, [(1, 0, 0), (1, 0, 1)])
    with pytest.raises(NoCandidateError):
        find_q_config(P, L, 1)


def test_r_config_full_plane(full_plane):
    P, L = full_plane(7)
    ctx = PlaneContext(7)
    q = find_q_config(P, L, 8)
    r = find_r_config(q, P, L, 8)
    assert r.line in L
    for pt in (r.p2, r.p3, r.p4):
        assert incident(ctx, pt, r.line)
    assert not incident(ctx, r.p1, r.line)
    assert len({r.p1, r.p2, r.p3, r.p4}) == 4
    assert r.p3 in q.Q and r.p4 in q.Q
    assert set(r.R) <= set(q.Q)
    assert set(r.R) == set(cover_set(q.Q, L, r.p3)) & set(cover_set(q.Q, L, r.p4))
    assert r.cert3.validate() and r.cert4.validate()
    assert r.stats["dominant_term"] in ("diagonal", "off-diagonal")
    diag, off = r.stats["diagonal_sum"], r.stats["off_diagonal_sum"]
    assert diag * diag <= len(q.Q) * (diag + off)


def _manual_q(p, P, L, p1, p2, Q):
    Qs = PointSet(p, Q)
    return QConfig(AffinePoint(*p1), AffinePoint(*p2), Qs, is_k_good(Qs, AffinePoint(*p1)),
                   is_k_good(Qs, AffinePoint(*p2)), None, 0)


def test_r_config_no_valid_line():
    p = 7
    P = PointSet(p, [(x, 0) for x in range(p)])
    L = LineSet(p, [(0, 1, 0)])
    q = _manual_q(p, P, L, (0, 0), (1, 0), [(2, 0), (3, 0), (4, 0)])
    with pytest.raises(NoValidLineError):
        find_r_config(q, P, L, 1)


def test_r_config_empty_r():
    p = 7
    L = LineSet(p, [(1, 0, 1), (1, 6, 1)])
    P = PointSet(p, [(0, 0), (1, 0), (1, 1), (2, 1)])
    q = _manual_q(p, P, L, (0, 0), (1, 0), [(1, 1), (2, 1)])
    with pytest.raises(EmptyRError):
        find_r_config(q, P, L, 1)
