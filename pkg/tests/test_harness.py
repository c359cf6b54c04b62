import hashlib
import math

import pytest
from hypothesis import given, settings, strategies as st

from fpinc.errors import DataError, OversizeError, TooFewPointsError
from fpinc.field import PlaneContext, incident, join
from fpinc.harness import (
    FAMILIES,
    GeneratorSpec,
    SplitMix64,
    default_lines,
    dumps_record,
    generate,
    instance_seed,
    run_beck_pipeline,
    run_incidence_pipeline,
    run_instance,
    summary_row,
    sweep,
    SUMMARY_COLUMNS,
)
from fpinc.incidence import LineSet, PointSet, count_incidences, lines_with_points


def test_splitmix_reference_values():
    rng = SplitMix64(0)
    assert [rng.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
    ]


@given(st.integers(0, 2**64 - 1), st.integers(1, 1000), st.integers(0, 50))
def test_splitmix_sample_distinct(seed, n, k):
    k = min(k, n)
    out = SplitMix64(seed).sample(n, k)
    assert len(out) == len(set(out)) == k
    assert all(0 <= v < n for v in out)


def test_instance_seed_definition():
    digest = hashlib.sha256(b"7:gp:12:3").digest()
    assert instance_seed(7, "gp", 12, 3) == int.from_bytes(digest[:8], "little")
    assert instance_seed(7, "gp", 12, 3) != instance_seed(7, "gp", 12, 4)


def test_generate_examples():
    inst = generate(GeneratorSpec("full-plane", 3))
    assert len(inst.points) == 9 and len(inst.lines) == 12
    inst = generate(GeneratorSpec("grid", 7, 3))
    assert len(inst.points) == 9 and inst.A == (0, 1, 2)
    a = generate(GeneratorSpec("random", 101, 50, seed=7))
    b = generate(GeneratorSpec("random", 101, 50, seed=7))
    assert a.points == b.points and a.lines == b.lines and len(a.points) == 50


@pytest.mark.parametrize("family", FAMILIES)
def test_generators_are_deterministic_and_valid(family):
    p = 101
    spec = GeneratorSpec(family, p, 9 if family != "full-plane" else 0, seed=12345)
    one, two = generate(spec), generate(spec)
    assert one.points == two.points and one.lines == two.lines and one.A == two.A
    ctx = PlaneContext(p)
    if family == "collinear":
        assert len(one.lines) == 1
        assert all(incident(ctx, pt, one.lines.lines[0]) for pt in one.points)
    if family == "gp":
        assert one.A == tuple(sorted(pow(2, i, p) for i in range(9)))
    if family == "ap":
        A = one.A
        diffs = {(y - x) % p for x in A for y in A}
        assert len(A) == 9 and len(diffs) <= 2 * 9 * 9
    if family == "union-of-lines":
        assert all(any(incident(ctx, pt, l) for l in one.lines) for pt in one.points)


def test_generator_errors():
    with pytest.raises(DataError):
        GeneratorSpec("spiral", 7)
    with pytest.raises(DataError):
        GeneratorSpec("grid", 9, 3)
    with pytest.raises(OversizeError):
        generate(GeneratorSpec("random", 3, 10))
    with pytest.raises(DataError):
        generate(GeneratorSpec("gp", 7, 5, ratio=2))  # 2 has order 3 mod 7


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_full_plane_closed_forms(p):
    inst = generate(GeneratorSpec("full-plane", p))
    assert count_incidences(inst.points, inst.lines).total == p * p * (p + 1)
    assert len(lines_with_points(inst.points)) == p * p + p


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(2, 31))
def test_random_pair_identity(seed, n):
    P = generate(GeneratorSpec("random", 1009, n, seed=seed)).points
    lp = lines_with_points(P)
    assert len(lp) <= math.comb(n, 2)
    assert sum(math.comb(len(v), 2) for v in lp.values()) == math.comb(n, 2)


def test_default_lines_prefers_rich_lines():
    P = PointSet(11, [(0, 0), (1, 0), (2, 0), (5, 7)])
    assert default_lines(P).lines == ((0, 1, 0),)
    P = PointSet(11, [(0, 0), (1, 3)])
    assert len(default_lines(P)) == 1


# -- pipelines -------------------------------------------------------------------


def _validate_case5(trace, ctx):
    red = trace.reduction
    assert all(red.checks.values())
    r = red.source
    stripped = [pt for pt in r.R if not incident(ctx, pt, r.line)]
    assert len(red.grid.G) == len(stripped)
    for key, apex in zip(("K1", "K2", "K3", "K4"), (r.p1, r.p2, r.p3, r.p4)):
        assert red.bounds[key] == len({join(ctx, apex, q) for q in stripped})
    assert len(red.grid.A) <= red.bounds["K3"]
    assert len(red.grid.B) <= red.bounds["K4"]


def test_incidence_pipeline_full_plane():
    inst = generate(GeneratorSpec("full-plane", 7))
    trace = run_incidence_pipeline(inst.points, inst.lines)
    assert trace.case in (1, 2, 3, 4, 5)
    names = [s["stage"] for s in trace.stages]
    assert names[:2] == ["refine_lines", "dyadic_points"]
    assert trace.stats["I"] == 7 * 7 * 8
    assert trace.warnings  # N >= p
    first = trace.stages[0]
    assert 2 * first["kept_I"] >= first["I"]
    if trace.case == 5:
        _validate_case5(trace, PlaneContext(7))
    trace.to_json()


def test_incidence_pipeline_collinear():
    inst = generate(GeneratorSpec("collinear", 101, 5, seed=1))
    trace = run_incidence_pipeline(inst.points, inst.lines)
    assert trace.case in (1, 2, 3, 4) and len(trace.stages) <= 2


def test_incidence_pipeline_without_lines():
    trace = run_incidence_pipeline(PointSet(7, [(1, 1)]), LineSet(7))
    assert trace.stats["I"] == 0 and trace.case == 1


@pytest.mark.parametrize("family, p, n", [("grid", 101, 6), ("ap", 101, 6), ("grid", 1009, 7)])
def test_product_families_reach_reduction(family, p, n):
    inst = generate(GeneratorSpec(family, p, n, seed=instance_seed(0, family, n, 0)))
    trace = run_incidence_pipeline(inst.points, default_lines(inst.points))
    assert trace.case == 5
    _validate_case5(trace, PlaneContext(p))


def test_beck_examples():
    P = PointSet(101, [(i, 3 * i + 2) for i in range(5)])
    trace = run_beck_pipeline(P)
    assert trace.stats["maxcol"] == 5 and trace.stats["L_of_P"] == 1
    assert trace.case in (1, 2, 3, 4)
    P = PointSet(7, [(0, 0), (1, 0), (0, 1), (1, 3)])
    trace = run_beck_pipeline(P)
    assert trace.stats["L_of_P"] == 6
    assert trace.stats["exponent"] == pytest.approx(math.log(6) / math.log(4))
    with pytest.raises(TooFewPointsError):
        run_beck_pipeline(PointSet(7, [(0, 0)]))


def test_beck_random_large():
    P = generate(GeneratorSpec("random", 1009, 200, seed=5)).points
    trace = run_beck_pipeline(P)
    assert trace.case in (1, 2, 3, 4, 5)
    assert trace.stats["L_of_P"] <= math.comb(200, 2)
    if trace.case == 5:
        _validate_case5(trace, PlaneContext(1009))


# -- records and sweeps --------------------------------------------------------------


def test_sweep_gp_rudnev():
    recs = sweep("gp", range(4, 17), 1009, check="rudnev")
    assert len(recs) == 13
    assert all(r["error"] is None and r["ratios"]["rudnev"]["value"] > 0 for r in recs)
    assert all(r["stats"]["energy_bounds"] for r in recs)


def test_sweep_empty_range():
    assert sweep("gp", [], 1009, check="rudnev") == []


def test_sweep_deterministic_with_jobs():
    a = [dumps_record(r) for r in sweep("random", [8, 12], 101, seeds=2, jobs=1)]
    b = [dumps_record(r) for r in sweep("random", [8, 12], 101, seeds=2, jobs=2)]
    assert a == b


def test_sweep_captures_errors():
    recs = sweep("random", [20], 3, check="incidence")
    assert recs[0]["error"].startswith("OversizeError")


def test_sweep_rejects_unknown_check():
    with pytest.raises(DataError):
        sweep("gp", [4], 1009, check="spectral")


def test_record_summary_columns():
    rec = run_instance(GeneratorSpec("gp", 1009, 6), "sumprod", {"family": "gp", "p": 1009, "size": 6, "index": 0})
    row = summary_row(rec)
    assert tuple(row) == SUMMARY_COLUMNS
    assert row["ratio_prop41"] > 0 and row["ratio_rudnev"] > 0
    assert rec["wall_time"] is None
    assert run_instance(GeneratorSpec("gp", 1009, 6), "rudnev", timing=True)["wall_time"] >= 0
