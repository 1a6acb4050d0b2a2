"""Built-in instance families used as the regression backbone.

Each entry records the expected facts it is built to exhibit, tagged with
how the value was obtained ("trivial", "derived"), so the test suite can
re-derive every one of them with the oracle and the solver.
"""
from __future__ import annotations

import math
from itertools import permutations
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from bvfix.constants import DEFAULT_GRID_POINTS, EPS_CHECK
from bvfix.contraction import Modulus, PairSource, check_weak_contractive, estimate_banach_c
from bvfix.oracle import brute_fixed_points, exact_constants, exhaustive_axiom_check
from bvfix.solver import StoppingCriteria, check_uniqueness, picard
from bvfix.space import MapModel, MetricSpaceModel, SpaceSignature, dump_instance

__all__ = [
    "CatalogEntry",
    "ConstructionError",
    "Fact",
    "ReductionCase",
    "all_entries",
    "make_banach_linear",
    "make_bv_finite",
    "make_kannan_classic",
    "make_swap",
    "make_weak_contractive_classic",
    "remark_reductions",
    "verify_entry",
]


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class Fact:
    value: Any
    provenance: str


@dataclass(eq=False)
class CatalogEntry:
    name: str
    space: MetricSpaceModel
    signature: SpaceSignature
    map: MapModel | None = None
    grid: np.ndarray | None = None
    phi: str | None = None
    expected: dict[str, Fact] = field(default_factory=dict)
    # solver settings under which the fixed-point facts are reproduced
    stop: StoppingCriteria = field(default_factory=StoppingCriteria)
    limit_tol: float = 1e-8

    @property
    def modulus(self) -> Modulus | None:
        return Modulus.expression(self.phi) if self.phi else None

    def pairs(self) -> PairSource:
        if self.space.is_finite:
            return PairSource.exhaustive(self.space)
        return PairSource.grid(self.grid)

    def start_points(self, k: int, seed: int = 0) -> list:
        """k distinct seeded starting points from the entry's grid / point set."""
        pool = self.space.points() if self.space.is_finite else self.grid
        idx = np.random.default_rng(seed).choice(len(pool), size=min(k, len(pool)), replace=False)
        pts = [pool[i] for i in sorted(idx)]
        return [int(p) for p in pts] if self.space.is_finite else [float(p) for p in pts]

    def to_instance(self) -> str:
        return dump_instance(self.space, self.map, self.signature, self.phi)


def _real_line(lo: float, hi: float, n: int) -> MetricSpaceModel:
    return MetricSpaceModel.from_function("abs(x - y)", lo, hi, sampler_n=n, sampler="grid")


def make_banach_linear(c: float, n: int = DEFAULT_GRID_POINTS) -> CatalogEntry:
    """S(u) = c u on [-10, 10] with the standard metric."""
    if not 0 <= c < 1:
        raise ConstructionError(f"c must lie in [0, 1), got {c}")
    space = _real_line(-10.0, 10.0, n)
    return CatalogEntry(
        name=f"banach_linear_{c:g}",
        space=space,
        signature=SpaceSignature(v=1, s=1.0, complete=True),
        map=MapModel.from_expr(f"{c!r}*x"),
        grid=space.sample(n),
        expected={
            "exact_c": Fact(c, "trivial: constant ratio of a linear map"),
            "fixed_point": Fact(0.0, "trivial: S(0) = 0"),
        },
    )


def make_kannan_classic(n: int = DEFAULT_GRID_POINTS) -> CatalogEntry:
    """S(u) = u/4 on [0, 1/2), u/5 on [1/2, 1]: Kannan but discontinuous at 1/2."""
    space = _real_line(0.0, 1.0, n)
    return CatalogEntry(
        name="kannan_classic",
        space=space,
        signature=SpaceSignature(v=1, s=1.0, complete=True),
        map=MapModel.from_expr("if(x < 0.5, x/4, x/5)"),
        grid=space.sample(n),
        expected={
            "gamma_range": Fact((0.0, 0.5), "derived: grid sup attained at pairs (0, u), value 1/3"),
            "fixed_point": Fact(0.0, "trivial: S(0) = 0"),
            "discontinuity": Fact(0.5, "derived: left limit 1/8 vs S(1/2) = 1/10"),
        },
    )


def make_weak_contractive_classic(n: int = DEFAULT_GRID_POINTS) -> CatalogEntry:
    """S(u) = u/(1+u) on [0, 10] with phi(t) = t^2/(1+t); weakly contractive, not Banach."""
    space = _real_line(0.0, 10.0, n)
    return CatalogEntry(
        name="weak_contractive_classic",
        space=space,
        signature=SpaceSignature(v=1, s=1.0, complete=True),
        map=MapModel.from_expr("x/(1+x)"),
        grid=space.sample(n),
        phi="t^2/(1+t)",
        expected={
            "weak_ok": Fact(True, "derived: (1+u)(1+w) >= 1+|u-w|"),
            "fixed_point": Fact(0.0, "trivial: S(0) = 0"),
            "banach_c_below_one_on_grid": Fact(True, "derived: sup (1+u)^-1 (1+w)^-1 < 1 off 0"),
        },
        # u_n = 1/(n + 1/u_0): steps shrink like 1/n^2, the limit error like 1/n
        stop=StoppingCriteria(tol_step=1e-8, max_iter=50_000),
        limit_tol=1e-3,
    )


def make_swap() -> CatalogEntry:
    """Two points exchanged by S: no fixed point, period-2 orbit."""
    space = MetricSpaceModel.from_matrix([[0.0, 1.0], [1.0, 0.0]], ["a", "b"])
    return CatalogEntry(
        name="swap",
        space=space,
        signature=SpaceSignature(v=1, s=1.0, complete=True),
        map=MapModel.from_table([1, 0]),
        expected={"fixed_points": Fact([], "trivial: derangement")},
    )


def _min_chain(D: np.ndarray, u: int, w: int, v: int) -> float:
    """Shortest path sum u -> z_1 -> .. -> z_v -> w over distinct intermediates."""
    n = D.shape[0]
    best = math.inf
    rest = [z for z in range(n) if z not in (u, w)]
    for chain in permutations(rest, v):
        hops = (u, *chain, w)
        best = min(best, sum(D[a, b] for a, b in zip(hops, hops[1:])))
    return best


def make_bv_finite(
    v: int, s: float, n: int, kannan_gamma: float | None = None
) -> CatalogEntry:
    """Finite space whose minimal polygon coefficient for ``v`` is exactly ``s``.

    Plant-and-saturate: all distances start at 1, then the pair (0, n-1) is
    stretched to ``s`` times its shortest v-intermediate chain, so that tuple
    attains ratio ``s`` while every other tuple stays at ratio <= 1.

    With ``kannan_gamma`` a table map with that exact Kannan constant is
    attached: 2 -> 3 -> 1 and everything else -> 1 (the unique fixed point),
    with d(3, 1) shortened to ``kannan_gamma``.
    """
    if v < 1 or not s >= 1:
        raise ConstructionError("need v >= 1 and s >= 1")
    if n < v + 2:
        raise ConstructionError(f"n = {n} points cannot host v + 2 = {v + 2} distinct points")
    if kannan_gamma is not None:
        if not 0 < kannan_gamma < 1:
            raise ConstructionError("kannan_gamma must lie in (0, 1)")
        if n < 5:
            raise ConstructionError("a planted Kannan map needs n >= 5 (two anchors + three orbit points)")

    D = np.ones((n, n))
    np.fill_diagonal(D, 0.0)
    table = None
    if kannan_gamma is not None:
        # chains hold at most one short edge, so every other tuple keeps ratio <= 1
        D[3, 1] = D[1, 3] = kannan_gamma
        table = [1] * n
        table[2] = 3
        table[3] = 1
    stretch = s * _min_chain(D, 0, n - 1, v)
    D[0, n - 1] = D[n - 1, 0] = stretch

    space = MetricSpaceModel.from_matrix(D)
    report = exhaustive_axiom_check(space, v, s)
    if not report.ok or report.worst_ratio is None or abs(report.worst_ratio - s) > EPS_CHECK * s:
        raise ConstructionError(
            f"construction failed verification: worst ratio {report.worst_ratio}, expected {s}"
        )
    expected = {
        "minimal_s": Fact(float(s), "derived: oracle at construction"),
        "witness_pair": Fact(("0", str(n - 1)), "derived: planted tuple"),
    }
    smap = None
    if table is not None:
        smap = MapModel.from_table(table)
        expected["exact_gamma"] = Fact(float(kannan_gamma), "derived: pair (2, 1) attains d(3,1)/d(2,3)")
        expected["fixed_points"] = Fact([1], "derived: table scan")
    return CatalogEntry(
        name=f"bv_finite_v{v}_s{s:g}_n{n}" + (f"_g{kannan_gamma:g}" if kannan_gamma else ""),
        space=space,
        signature=SpaceSignature(v=v, s=float(s), complete=True, axiom_status="verified-exhaustive"),
        map=smap,
        expected=expected,
    )


def all_entries() -> list[CatalogEntry]:
    return [
        make_banach_linear(0.5),
        make_kannan_classic(),
        make_weak_contractive_classic(),
        make_bv_finite(1, 2.0, 3),
        make_bv_finite(2, 1.0, 5, kannan_gamma=0.25),
        make_bv_finite(1, 3.0, 10, kannan_gamma=0.4),
    ]


def verify_entry(entry: CatalogEntry) -> dict[str, bool]:
    """Re-derive every expected fact of ``entry``; returns fact -> reproduced."""
    out: dict[str, bool] = {}
    exp = entry.expected
    if entry.map is not None:
        c, g = exact_constants(entry.space, entry.map, None if entry.space.is_finite else entry.grid)
    if "exact_c" in exp:
        out["exact_c"] = abs(c.value - exp["exact_c"].value) <= EPS_CHECK
    if "exact_gamma" in exp:
        out["exact_gamma"] = abs(g.value - exp["exact_gamma"].value) <= EPS_CHECK
    if "gamma_range" in exp:
        lo, hi = exp["gamma_range"].value
        out["gamma_range"] = lo < g.value < hi
    if "fixed_point" in exp:
        x = exp["fixed_point"].value
        u = _picard_limit(entry)
        out["fixed_point"] = entry.map(x) == x and u is not None and abs(u - x) <= entry.limit_tol
    if "fixed_points" in exp:
        out["fixed_points"] = brute_fixed_points(entry.map) == exp["fixed_points"].value
    if "minimal_s" in exp:
        rep = exhaustive_axiom_check(entry.space, entry.signature.v, entry.signature.s)
        out["minimal_s"] = rep.ok and abs(rep.worst_ratio - exp["minimal_s"].value) <= EPS_CHECK
    if "witness_pair" in exp:
        rep = exhaustive_axiom_check(entry.space, entry.signature.v, entry.signature.s)
        out["witness_pair"] = set(rep.witness[:2]) == set(exp["witness_pair"].value)
    if "weak_ok" in exp:
        res = check_weak_contractive(entry.space, entry.map, entry.modulus, entry.pairs())
        out["weak_ok"] = res.weak_ok == exp["weak_ok"].value
    if "banach_c_below_one_on_grid" in exp:
        out["banach_c_below_one_on_grid"] = estimate_banach_c(entry.space, entry.map, entry.pairs()).value < 1
    if "discontinuity" in exp:
        x = exp["discontinuity"].value
        left = entry.map(np.nextafter(x, -np.inf))
        out["discontinuity"] = abs(left - entry.map(x)) > 1e-3
    return out


def _picard_limit(entry: CatalogEntry):
    lo, hi = entry.space.domain
    tr = picard(entry.space, entry.map, hi, entry.stop)
    return tr.status.fixed_point if tr.status.converged else None


# ---------------------------------------------------------------------------
# parameter reductions


@dataclass
class ReductionCase:
    name: str
    entry: CatalogEntry
    c: float | None = None

    def run(self) -> dict[str, bool]:
        """Evaluate the reduction; every value must be True."""
        e = self.entry
        out: dict[str, bool] = {}
        pairs = e.pairs()
        if self.c is not None:
            c_hat = estimate_banach_c(e.space, e.map, pairs)
            weak = check_weak_contractive(e.space, e.map, Modulus.linear(1 - self.c), pairs)
            out["weak <=> banach"] = weak.weak_ok == (c_hat.value <= self.c + EPS_CHECK)
            out["weak holds"] = weak.weak_ok
        verdict = check_uniqueness(e.space, e.map, e.start_points(5, seed=0), e.stop)
        out["converges to a unique limit"] = verdict.status == "pass"
        if e.signature.v == 1 and e.signature.s == 1 and self.c is None:
            _, g = exact_constants(e.space, e.map, None if e.space.is_finite else e.grid)
            # with s = 1, s*gamma <= 1 is implied by gamma < 1/2
            out["s*gamma <= 1 implied"] = (g.value < 0.5) <= (e.signature.s * g.value <= 1)
        return out


def remark_reductions() -> list[ReductionCase]:
    """Parameter reductions to the classical theorems (v = s = 1, phi(t) = ct)."""
    cases = [ReductionCase(f"banach v=s=1 c={c:g}", make_banach_linear(c), c) for c in (0.0, 0.5, 0.9)]
    cases.append(ReductionCase("linear phi, v=2 s=1 b_v(s) space", make_bv_finite(2, 1.0, 5, 0.25), 0.25))
    cases.append(ReductionCase("linear phi, v=1 s=2 b-metric", make_bv_finite(1, 2.0, 6, 0.25), 0.25))
    cases.append(ReductionCase("kannan v=s=1 classical", make_kannan_classic()))
    cases.append(ReductionCase("kannan v=2 s=1 rectangular", make_bv_finite(2, 1.0, 6, 0.3)))
    return cases
