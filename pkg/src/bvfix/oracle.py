"""Brute-force ground truth for finite instances.

Deliberately shares no code path with the kernels it checks: the axiom check
enumerates *ordered* tuples with dense numpy broadcasting (or itertools for
tall chains), and the contraction constants are plain Python loops over
ordered pairs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from bvfix.constants import EPS_CHECK, EPS_EQ, ORACLE_BUDGET
from bvfix.contraction import Estimate
from bvfix.space import AxiomReport, MapModel, MetricSpaceModel

__all__ = [
    "OracleBudgetError",
    "OracleResult",
    "brute_fixed_points",
    "exact_constants",
    "exhaustive_axiom_check",
    "oracle_report",
]

# largest n**(v+1) block materialized per base point
_DENSE_LIMIT = 1 << 22


class OracleBudgetError(RuntimeError):
    """Instance too large to enumerate; shrink it."""


@dataclass
class OracleResult:
    fixed_points: list
    exact_c: Estimate
    exact_gamma: Estimate
    axiom_verdict: AxiomReport | None


def brute_fixed_points(smap: MapModel) -> list[int]:
    if smap.kind != "table":
        raise TypeError("brute_fixed_points needs a table-backed map")
    return [p for p, q in enumerate(smap.table) if p == q]


def _ordered_count(n: int, v: int) -> int:
    if n - 2 < v:
        return 0
    return n * (n - 1) * math.perm(n - 2, v)


def _dense_worst(D: np.ndarray, v: int):
    """Worst ratio over ordered tuples; witness in (u, w, z_1..z_v) lex order."""
    n = D.shape[0]
    worst, witness, checked, skipped = -math.inf, None, 0, 0
    axes = v + 1  # z_1..z_v then w
    idx = [np.arange(n).reshape([n if a == k else 1 for a in range(axes)]) for k in range(axes)]
    for u in range(n):
        path = D[u].reshape([n] + [1] * v)
        for k in range(1, axes):
            shape = [1] * axes
            shape[k - 1], shape[k] = n, n
            path = path + D.reshape(shape)
        mask = np.ones([n] * axes, dtype=bool)
        for a in range(axes):
            mask &= idx[a] != u
            for b in range(a + 1, axes):
                mask &= idx[a] != idx[b]
        lhs = np.broadcast_to(D[u].reshape([1] * v + [n]), path.shape)
        zero = mask & (path <= EPS_EQ)
        skip = zero & (lhs <= EPS_EQ)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(zero, np.inf, lhs / path)
        ratio = np.where(mask & ~skip, ratio, -np.inf)
        checked += int(mask.sum())
        skipped += int(skip.sum())
        # w first so argmax tie-breaks in (w, z_1, ..) order
        ratio = np.moveaxis(ratio, -1, 0)
        flat = int(np.argmax(ratio))
        r = float(ratio.flat[flat])
        if r > worst:
            pos = np.unravel_index(flat, ratio.shape)
            worst = r
            witness = (u, int(pos[0]), *(int(z) for z in pos[1:]))
    return worst, witness, checked, skipped


def _iter_worst(D: np.ndarray, v: int):
    rows = D.tolist()
    n = len(rows)
    worst, witness, checked, skipped = -math.inf, None, 0, 0
    for u in range(n):
        for w in range(n):
            if w == u:
                continue
            rest = [z for z in range(n) if z != u and z != w]
            for chain in itertools.permutations(rest, v):
                hops = (u, *chain, w)
                path = math.fsum(rows[a][b] for a, b in zip(hops, hops[1:]))
                checked += 1
                if path <= EPS_EQ:
                    if rows[u][w] <= EPS_EQ:
                        skipped += 1
                        continue
                    r = math.inf
                else:
                    r = rows[u][w] / path
                if r > worst:
                    worst, witness = r, (u, w, *chain)
    return worst, witness, checked, skipped


def exhaustive_axiom_check(space: MetricSpaceModel, v: int, s: float) -> AxiomReport:
    """Ground-truth axiom check (separation, symmetry, polygon inequality) by full enumeration."""
    if not space.is_finite:
        raise TypeError("oracle handles finite (matrix-backed) spaces only")
    if v < 1 or not s >= 1:
        raise ValueError("need v >= 1 and s >= 1")
    D = np.asarray(space.matrix, dtype=float)
    n = D.shape[0]
    total = _ordered_count(n, v)
    if total > ORACLE_BUDGET:
        raise OracleBudgetError(f"{total} ordered tuples exceed the oracle budget {ORACLE_BUDGET}")

    cond1 = all(
        (D[i, j] == 0) if i == j else (D[i, j] > EPS_EQ) for i in range(n) for j in range(n)
    )
    cond2 = bool((D == D.T).all())
    report = AxiomReport(
        v=v, s=float(s), condition1_ok=cond1, condition2_ok=cond2, condition3_ok=True,
        worst_ratio=None, witness=None, tuples_checked=0, mode="exhaustive", n_points=n,
    )
    if total == 0:
        report.vacuous = True
        return report

    if n ** (v + 1) <= _DENSE_LIMIT:
        worst, wit, checked, skipped = _dense_worst(D, v)
    else:
        worst, wit, checked, skipped = _iter_worst(D, v)
    report.tuples_checked = checked
    report.skipped_zero = skipped
    if wit is not None:
        report.worst_ratio = worst
        report.witness = tuple(space.labels[i] for i in wit)
        report.condition3_ok = worst <= s * (1 + EPS_CHECK)
    return report


def exact_constants(
    space: MetricSpaceModel, smap: MapModel, points=None
) -> tuple[Estimate, Estimate]:
    """Exact Banach c and Kannan gamma over all ordered pairs u != w.

    ``points`` defaults to the whole finite space; for function-backed spaces
    pass the grid to enumerate.
    """
    if points is None:
        if not space.is_finite:
            raise TypeError("function-backed spaces need an explicit point grid")
        points = space.points()
    pts = np.asarray(points)
    n = len(pts)
    img = smap.image(pts)
    d = space.pairwise(pts).tolist()
    ds = space.pairwise(img).tolist()
    if space.is_finite:
        r = [float(space.matrix[p, q]) for p, q in zip(pts, img)]
    else:
        r = [space.d(float(p), float(q)) for p, q in zip(pts, img)]
    labels = [int(p) if space.is_finite else float(p) for p in pts]

    c, cw = 0.0, None
    g, gw = 0.0, None
    c_seen = g_seen = False
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            num = ds[i][j]
            if not math.isinf(c):
                if d[i][j] > EPS_EQ:
                    q = num / d[i][j]
                    if not c_seen or q > c:
                        c, cw, c_seen = q, (labels[i], labels[j]), True
                elif num > EPS_EQ:
                    c, cw = math.inf, (labels[i], labels[j])
            if not math.isinf(g):
                den = r[i] + r[j]
                if den > EPS_EQ:
                    q = num / den
                    if not g_seen or q > g:
                        g, gw, g_seen = q, (labels[i], labels[j]), True
                elif num > EPS_EQ:
                    g, gw = math.inf, (labels[i], labels[j])
    return Estimate(c, cw), Estimate(g, gw)


def oracle_report(
    space: MetricSpaceModel, smap: MapModel | None, v: int, s: float
) -> OracleResult:
    fixed = brute_fixed_points(smap) if smap is not None and smap.kind == "table" else []
    if smap is not None:
        c, g = exact_constants(space, smap)
    else:
        c = g = Estimate(0.0)
    return OracleResult(fixed, c, g, exhaustive_axiom_check(space, v, s))
