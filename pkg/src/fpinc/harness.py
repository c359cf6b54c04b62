"""Instance generators, proof-pipeline trace executors and seeded sweeps.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014), chosen because it
is a few lines in any language; per-instance seeds are the first 8 bytes
(little endian) of sha256("{master}:{family}:{size}:{index}").
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    DataError,
    EmptyRError,
    EmptySetError,
    FpincError,
    InvariantViolation,
    NoCandidateError,
    NoValidLineError,
    OversizeError,
    TooFewPointsError,
)
from .field import AffLine, PlaneContext, all_lines, all_points, incident
from .incidence import (
    LineSet,
    PointSet,
    count_incidences,
    dyadic_select_lines,
    dyadic_select_points,
    lines_with_points,
    log_factor,
    max_collinear,
)
from .refine import find_q_config, find_r_config, refine_bounded_lines
from .sumprod import (
    GridInstance,
    check_partial_sumprod,
    check_rudnev,
    mult_energy,
    reduce_points,
)

MASK64 = (1 << 64) - 1

FAMILIES = (
    "random", "grid", "ap", "gp", "union-of-lines", "near-collinear", "full-plane", "collinear",
)
CHECKS = ("incidence", "beck", "rudnev", "sumprod")


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection."""
        if not 0 < n <= 1 << 64:
            raise ValueError(f"range {n} out of bounds")
        limit = (1 << 64) - (1 << 64) % n
        while True:
            v = self.next()
            if v < limit:
                return v % n

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct integers from [0, n), in draw order."""
        if k > n:
            raise OversizeError(f"cannot draw {k} distinct values from {n}")
        if 2 * k <= n:
            seen, out = set(), []
            while len(out) < k:
                v = self.below(n)
                if v not in seen:
                    seen.add(v)
                    out.append(v)
            return out
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def instance_seed(master: int, family: str, size: int, index: int) -> int:
    digest = hashlib.sha256(f"{master}:{family}:{size}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    p: int
    n: int = 0  # points, or |A| for the product families
    seed: int = 0
    m: int | None = None  # random lines; outliers for near-collinear; lines for union-of-lines
    start: int | None = None  # ap first term
    step: int | None = None  # ap difference
    ratio: int = 2  # gp common ratio

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        PlaneContext(self.p)
        if self.n < 0 or (self.m is not None and self.m < 0):
            raise DataError("sizes must be non-negative")

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass(frozen=True)
class Instance:
    spec: GeneratorSpec
    points: PointSet
    lines: LineSet | None = None
    A: tuple | None = None  # base set of the product families


def _line_from_index(p: int, idx: int) -> AffLine:
    if idx < p:
        return AffLine(0, 1, idx)
    b, c = divmod(idx - p, p)
    return AffLine(1, b, c)


def _points_on(p: int, line: AffLine) -> list:
    a, b, c = line
    if b == 0:  # x = c
        return [(c, y) for y in range(p)]
    inv_b = pow(b, -1, p)
    return [(x, (c - a * x) * inv_b % p) for x in range(p)]


def generate(spec: GeneratorSpec) -> Instance:
    """Deterministic instance for a generator spec."""
    p, n, fam = spec.p, spec.n, spec.family
    rng = SplitMix64(spec.seed)
    if n > p * p:
        raise OversizeError(f"{n} points requested but F_{p}^2 has {p * p}")

    if fam == "full-plane":
        ctx = PlaneContext(p)
        return Instance(spec, PointSet(p, all_points(ctx)), LineSet._trusted(p, all_lines(ctx)))

    if fam == "random":
        m = n if spec.m is None else spec.m
        if m > p * p + p:
            raise OversizeError(f"{m} lines requested but F_{p}^2 has {p * p + p}")
        pts = [divmod(v, p) for v in rng.sample(p * p, n)]
        lines = [_line_from_index(p, v) for v in rng.sample(p * p + p, m)]
        return Instance(spec, PointSet(p, pts), LineSet._trusted(p, lines))

    if fam in ("grid", "ap", "gp"):
        A = _base_set(spec, rng)
        return Instance(spec, PointSet(p, [(a, b) for a in A for b in A]), None, A)

    if fam in ("collinear", "near-collinear"):
        if n > p:
            raise OversizeError(f"a line of F_{p}^2 holds only {p} points")
        outliers = 0
        if fam == "near-collinear":
            outliers = max(1, n // 10) if spec.m is None else spec.m
            outliers = min(outliers, n)
        line = _line_from_index(p, rng.below(p * p + p))
        on = _points_on(p, line)
        chosen = [on[i] for i in rng.sample(p, n - outliers)]
        off = []
        while len(off) < outliers:
            x, y = divmod(rng.below(p * p), p)
            if (line.a * x + line.b * y - line.c) % p and (x, y) not in off:
                off.append((x, y))
        lines = LineSet._trusted(p, [line]) if fam == "collinear" else None
        return Instance(spec, PointSet(p, chosen + off), lines)

    # union-of-lines
    k = spec.m if spec.m is not None else max(2, math.isqrt(max(n, 1)))
    if k > p * p + p:
        raise OversizeError(f"{k} lines requested but F_{p}^2 has {p * p + p}")
    lines = [_line_from_index(p, v) for v in rng.sample(p * p + p, k)]
    union = sorted({pt for l in lines for pt in _points_on(p, l)})
    if n > len(union):
        raise OversizeError(f"{n} points requested but the {k} lines hold {len(union)}")
    pts = [union[i] for i in rng.sample(len(union), n)]
    return Instance(spec, PointSet(p, pts), LineSet._trusted(p, lines))


def _base_set(spec: GeneratorSpec, rng: SplitMix64) -> tuple:
    p, n = spec.p, spec.n
    if n > p:
        raise OversizeError(f"|A| = {n} exceeds p = {p}")
    if spec.family == "grid":
        return tuple(range(n))
    if spec.family == "ap":
        start = rng.below(p) if spec.start is None else spec.start % p
        step = 1 + rng.below(p - 1) if spec.step is None else spec.step % p
        if step == 0:
            raise DataError("ap step must be nonzero mod p")
        return tuple(sorted({(start + i * step) % p for i in range(n)}))
    g = spec.ratio % p
    A = {pow(g, i, p) for i in range(n)}
    if len(A) != n:
        raise DataError(f"{spec.ratio} has multiplicative order below {n} mod {p}")
    return tuple(sorted(A))


def default_lines(P: PointSet) -> LineSet:
    """Lines for point-only families: determined lines holding >= 3 points
    of P, or every determined line if none does."""
    if len(P) < 2:
        return LineSet(P.p)
    lp = lines_with_points(P)
    rich = [l for l, pts in lp.items() if len(pts) >= 3]
    return LineSet._trusted(P.p, rich or lp)


# -- proof pipelines ---------------------------------------------------------


@dataclass
class CaseTrace:
    pipeline: str
    stages: list = field(default_factory=list)
    case: int | None = None
    reason: str = ""
    stats: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    reduction: object = None
    partial_sumprod: object = None

    def add(self, stage: str, **values):
        self.stages.append({"stage": stage, **values})

    def finish(self, case: int, reason: str):
        self.case = case
        self.reason = reason
        return self

    def to_json(self) -> dict:
        d = {
            "pipeline": self.pipeline,
            "case": self.case,
            "reason": self.reason,
            "stages": jsonable(self.stages),
            "stats": jsonable(self.stats),
            "warnings": list(self.warnings),
        }
        if self.reduction is not None:
            red = self.reduction
            d["reduction"] = {
                "bounds": red.bounds,
                "sizes": red.sizes,
                "checks": red.checks,
                "labelings": red.labelings,
                "pencil": red.pencil,
                "tau": [list(r) for r in red.tau.rows],
                "grid": red.grid.to_json(),
            }
        if self.partial_sumprod is not None:
            d["partial_sumprod"] = jsonable(self.partial_sumprod.__dict__)
        return d


def _case_ratios(n_points: int, n_lines: int, K: int) -> dict:
    """LHS / RHS of the four degenerate alternatives; small means it holds."""
    L = max(n_lines, 1)
    return {
        1: Fraction(n_points * K**2, L),
        2: Fraction(n_points * K**3, L**2),
        3: Fraction(n_points * K**5, L**3),
        4: Fraction(K**5, L**2),
    }


def _smallest(ratios: dict, cases) -> int:
    return min(cases, key=lambda c: (ratios[c], c))


def _configuration_chain(trace: CaseTrace, P1: PointSet, L: LineSet, K: int) -> CaseTrace:
    """Shared tail of both pipelines: Q, R, strip l*, reduce, partial sum-product."""
    ctx = PlaneContext(P1.p)
    ratios = _case_ratios(len(P1), len(L), K)
    trace.stats["case_ratios"] = {str(c): r for c, r in ratios.items()}
    if K < 2:
        # every point lies on one line, so no second supporting line through p2 exists
        return trace.finish(_smallest(ratios, (2, 3, 4)), "K < 2: no line through p2 avoids p1")
    try:
        q = find_q_config(P1, L, K)
    except (NoCandidateError, TooFewPointsError) as exc:
        trace.add("q_config", error=str(exc))
        return trace.finish(1, f"first configuration search failed: {exc}")
    trace.add(
        "q_config", p1=list(q.p1), p2=list(q.p2), Q=len(q.Q), cover=q.cover_size,
        K1=q.cert1.K, K2=q.cert2.K, ratio=q.ratio,
    )
    try:
        r = find_r_config(q, P1, L, K)
    except (NoValidLineError, EmptyRError) as exc:
        trace.add("r_config", error=str(exc))
        return trace.finish(_smallest(ratios, (2, 3, 4)), f"second configuration search failed: {exc}")
    trace.add(
        "r_config", p3=list(r.p3), p4=list(r.p4), line=list(r.line), R=len(r.R),
        K3=r.cert3.K, K4=r.cert4.K, ratio=r.ratio, **r.stats,
    )
    stripped = [pt for pt in r.R if not incident(ctx, pt, r.line)]
    trace.add("strip", R=len(r.R), R_off_line=len(stripped))
    if not stripped:
        return trace.finish(_smallest(ratios, (2, 3, 4)), "R lies entirely on l*")
    red = reduce_points(ctx, stripped, r.p1, r.p2, r.p3, r.p4, source=r)
    trace.reduction = red
    trace.add("reduce", **red.sizes, **red.bounds, pencil=red.pencil)
    try:
        rep = check_partial_sumprod(red.grid)
    except EmptySetError as exc:
        trace.add("partial_sumprod", error=str(exc))
        return trace.finish(5, "reduced to a grid; ratio set undefined")
    trace.partial_sumprod = rep
    trace.add("partial_sumprod", ratio=rep.ratio, G=rep.G, A=rep.A, B=rep.B, diff=rep.diff, ratio_size=rep.ratio_size)
    return trace.finish(5, "reduced to a partial sum-product grid")


def run_incidence_pipeline(P: PointSet, L: LineSet) -> CaseTrace:
    """Trace of the incidence-bound argument on (P, L)."""
    trace = CaseTrace("incidence")
    N = max(len(P), len(L))
    trace.stats["N"] = N
    if N >= P.p:
        trace.warnings.append(f"N = {N} is not below p = {P.p}")
    I = count_incidences(P, L).total if len(P) and len(L) else 0
    trace.stats["I"] = I
    if I == 0:
        trace.add("refine_lines", I=0, lines=len(L))
        trace.stats["case_ratios"] = {"1": Fraction(0)}
        return trace.finish(1, "no incidences")
    L1 = refine_bounded_lines(P, L)
    trace.add("refine_lines", I=I, lines=len(L), kept_lines=len(L1), kept_I=count_incidences(P, L1).total)
    d = dyadic_select_points(P, L1)
    P1, K = P.subset(d.members), d.level
    trace.add(
        "dyadic_points", P1=len(P1), K=K, mass=d.mass, classes=d.n_classes,
        log_loss=Fraction(I, d.mass), log_factor=log_factor(len(L1)),
        mass_vs_N15=len(P1) * K / N**1.5, K_vs_sqrtN=K / N**0.5,
    )
    trace.stats.update(K=K, P1=len(P1))
    return _configuration_chain(trace, P1, L1, K)


def run_beck_pipeline(P: PointSet) -> CaseTrace:
    """Trace of the Beck-type argument on P, with L = L(P)."""
    if len(P) < 2:
        raise TooFewPointsError(f"need at least 2 points, got {len(P)}")
    trace = CaseTrace("beck")
    if len(P) >= P.p:
        trace.warnings.append(f"|P| = {len(P)} is not below p = {P.p}")
    lp = lines_with_points(P)
    n = len(P)
    pairs = sum(len(pts) * (len(pts) - 1) // 2 for pts in lp.values())
    if pairs != n * (n - 1) // 2:
        raise InvariantViolation("pair count over determined lines disagrees with C(|P|, 2)")
    _, maxcol = max_collinear(P)
    exponent = math.log(len(lp)) / math.log(n)
    trace.stats.update(L_of_P=len(lp), maxcol=maxcol, exponent=exponent)
    trace.add("determined_lines", lines=len(lp), maxcol=maxcol, exponent=exponent)

    LP = LineSet._trusted(P.p, lp)
    dl = dyadic_select_lines(P, LP)
    L1, k = LP.subset(dl.members), dl.level
    energy = sum(len(pts) ** 2 for pts in lp.values())
    trace.add("dyadic_lines", L1=len(L1), k=k, mass=dl.mass, sum_mu2=energy, line_mass_share=Fraction(dl.mass, n * n))
    dp = dyadic_select_points(P, L1)
    P1, K = P.subset(dp.members), dp.level
    trace.add("dyadic_points", P1=len(P1), K=K, point_line_balance=Fraction(len(P1) * K, len(L1) * k))
    trace.stats.update(k=k, K=K, P1=len(P1), L1=len(L1))
    return _configuration_chain(trace, P1, L1, K)


# -- records and sweeps --------------------------------------------------------


def ratio_entry(value: Fraction, statement: str) -> dict:
    num, den = value.numerator, value.denominator
    log10 = math.log10(num) - math.log10(den) if num > 0 else float("-inf")
    return {"statement": statement, "value": float(value), "log10": log10}


def jsonable(obj):
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def _energy_bounds_hold(A, energy: int) -> bool:
    n = len(A)
    return 0 in A or n * n <= energy <= n**3


def run_instance(spec: GeneratorSpec, check: str, key: dict | None = None, timing: bool = False) -> dict:
    """One ExperimentRecord. Errors are captured, never raised."""
    t0 = time.perf_counter()
    rec = {"key": key or {}, "spec": spec.to_json(), "check": check, "stats": {}, "ratios": {},
           "case": None, "error": None}
    try:
        inst = generate(spec)
        P = inst.points
        stats, ratios = rec["stats"], rec["ratios"]
        if check in ("incidence", "beck"):
            if check == "incidence":
                L = inst.lines if inst.lines is not None else default_lines(P)
                rec["N"] = max(len(P), len(L))
                trace = run_incidence_pipeline(P, L)
                if len(P) >= 2:
                    _, stats["maxcol"] = max_collinear(P)
            else:
                rec["N"] = len(P)
                trace = run_beck_pipeline(P)
            stats.update(jsonable(trace.stats))
            rec["case"] = trace.case
            rec["trace"] = trace.to_json()
            if trace.partial_sumprod is not None:
                ratios["partial_sumprod"] = ratio_entry(trace.partial_sumprod.ratio, "partial sum-product |G|^55 bound")
        else:
            if inst.A is None:
                raise DataError(f"check {check!r} needs a product family (grid, ap, gp)")
            A = inst.A
            rud = _quietly(check_rudnev, A, spec.p)
            rec["N"] = len(A)
            stats.update(size=len(A), energy=rud.energy, diff=rud.diff_size,
                         energy_bounds=_energy_bounds_hold(A, rud.energy))
            ratios["rudnev"] = ratio_entry(rud.ratio, "E(A)^4 vs |A-A|^7 |A|^4")
            if check == "sumprod":
                rep = _quietly(check_partial_sumprod, GridInstance.complete(spec.p, A))
                stats.update(G=rep.G, partial_diff=rep.diff, partial_ratio=rep.ratio_size)
                ratios["partial_sumprod"] = ratio_entry(rep.ratio, "partial sum-product |G|^55 bound")
    except FpincError as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
    rec["wall_time"] = round(time.perf_counter() - t0, 6) if timing else None
    return rec


def _quietly(fn, *args):
    # precondition warnings are carried on the returned report instead
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args)


def _task(args):
    return run_instance(*args)


def sweep(family: str, sizes, p: int, seeds: int = 1, check: str = "incidence", master_seed: int = 0,
          jobs: int = 1, timing: bool = False, **params) -> list[dict]:
    """One record per (size, seed index), sorted by key."""
    if check not in CHECKS:
        raise DataError(f"unknown check {check!r}; choose from {', '.join(CHECKS)}")
    tasks = []
    for size in sizes:
        for index in range(seeds):
            seed = instance_seed(master_seed, family, size, index)
            spec = GeneratorSpec(family, p, size, seed, **params)
            key = {"family": family, "p": p, "size": size, "index": index}
            tasks.append((spec, check, key, timing))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_task, tasks))
    else:
        records = [_task(t) for t in tasks]
    records.sort(key=lambda r: (r["key"]["family"], r["key"]["p"], r["key"]["size"], r["key"]["index"]))
    return records


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, allow_nan=True)


SUMMARY_COLUMNS = (
    "family", "p", "size", "seed", "I", "L_of_P", "maxcol", "case", "ratio_rudnev", "ratio_prop41",
    "exponent",
)


def summary_row(rec: dict) -> dict:
    stats, ratios = rec["stats"], rec["ratios"]
    return {
        "family": rec["key"].get("family", rec["spec"]["family"]),
        "p": rec["spec"]["p"],
        "size": rec["spec"].get("n"),
        "seed": rec["spec"].get("seed"),
        "I": stats.get("I"),
        "L_of_P": stats.get("L_of_P"),
        "maxcol": stats.get("maxcol"),
        "case": rec.get("case"),
        "ratio_rudnev": ratios.get("rudnev", {}).get("value"),
        "ratio_prop41": ratios.get("partial_sumprod", {}).get("value"),
        "exponent": stats.get("exponent"),
    }
