"""Distance structures, self-maps, instance files and b_v(s) axiom checks.

A b_v(s) space relaxes the triangle inequality to a polygon inequality::

    d(u, w) <= s * [d(u, z_1) + d(z_1, z_2) + ... + d(z_v, w)]

for all u != w and all pairwise distinct z_1..z_v different from u and w.
v = 1 gives b-metric spaces, v = 2 with s = 1 rectangular metric spaces.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from bvfix._backend import kernels
from bvfix.constants import DEFAULT_BUDGET, EPS_CHECK, EPS_EQ
from bvfix.expr import Expression, ExpressionSyntaxError, compile_expression

__all__ = [
    "AxiomReport",
    "DomainEscapeError",
    "Instance",
    "InstanceError",
    "MapModel",
    "MetricSpaceModel",
    "MinimalS",
    "SpaceSignature",
    "admissible_tuple_count",
    "check_axioms",
    "classify_space",
    "dump_instance",
    "load_instance",
    "minimal_s",
    "parse_instance",
]


class InstanceError(ValueError):
    """Malformed or inconsistent instance document."""


class DomainEscapeError(RuntimeError):
    def __init__(self, index: int, value):
        self.index = index
        self.value = value
        super().__init__(f"iterate {index} left the domain: {value!r}")


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True, eq=False)
class MetricSpaceModel:
    """Point domain plus distance function.

    Matrix-backed spaces are finite; points are the indices ``0..n-1`` and
    ``labels`` are only for display.  Function-backed spaces live on a real
    interval ``domain``; points are floats and ``distance`` must accept numpy
    arrays (it is evaluated with broadcasting).
    """

    backing: str
    matrix: np.ndarray | None = None
    labels: tuple[str, ...] = ()
    distance: Callable | None = field(default=None, repr=False)
    domain: tuple[float, float] | None = None
    sampler_n: int = 0
    sampler: str = "random"
    d_source: str | None = None

    @classmethod
    def from_matrix(cls, matrix, labels: Sequence | None = None) -> "MetricSpaceModel":
        D = np.array(matrix, dtype=float)
        _validate_matrix(D)
        if labels is None:
            labels = [str(i) for i in range(D.shape[0])]
        labels = tuple(str(x) for x in labels)
        if len(labels) != D.shape[0]:
            raise InstanceError(
                f"size mismatch: {len(labels)} point labels for a {D.shape[0]}x{D.shape[0]} matrix"
            )
        if len(set(labels)) != len(labels):
            raise InstanceError("duplicate point labels")
        D.flags.writeable = False
        return cls("matrix", matrix=D, labels=labels)

    @classmethod
    def from_function(
        cls,
        distance: Callable | str = "abs(x - y)",
        lo: float = 0.0,
        hi: float = 1.0,
        sampler_n: int = 200,
        sampler: str = "random",
    ) -> "MetricSpaceModel":
        d_source = None
        if isinstance(distance, str):
            d_source = distance
            distance = compile_expression(distance, ("x", "y"))
        elif isinstance(distance, Expression):
            d_source = distance.source
        if not lo < hi:
            raise InstanceError(f"empty domain [{lo}, {hi}]")
        if sampler not in ("random", "grid"):
            raise InstanceError(f"unknown sampler {sampler!r}")
        return cls(
            "function",
            distance=distance,
            domain=(float(lo), float(hi)),
            sampler_n=int(sampler_n),
            sampler=sampler,
            d_source=d_source,
        )

    @property
    def is_finite(self) -> bool:
        return self.backing == "matrix"

    def __len__(self) -> int:
        if not self.is_finite:
            raise TypeError("function-backed space has no finite size")
        return self.matrix.shape[0]

    def d(self, p, q) -> float:
        if self.is_finite:
            return float(self.matrix[p, q])
        return float(self.distance(p, q))

    def points(self) -> np.ndarray:
        """All points of a finite space (indices)."""
        return np.arange(len(self))

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        """Finite point set drawn from the space (deterministic per seed)."""
        if self.is_finite:
            return self.points()
        lo, hi = self.domain
        if self.sampler == "grid":
            return np.linspace(lo, hi, n)
        return np.sort(np.random.default_rng(seed).uniform(lo, hi, n))

    def pairwise(self, points) -> np.ndarray:
        """Distance matrix over ``points`` (C-contiguous float64)."""
        pts = np.asarray(points)
        if self.is_finite:
            D = self.matrix[np.ix_(pts, pts)]
        else:
            x = pts.astype(float)
            D = np.asarray(self.distance(x[:, None], x[None, :]), dtype=float)
        return np.ascontiguousarray(D, dtype=float)

    def distances_to(self, points, q) -> np.ndarray:
        """Vector of d(p, q) for each p in ``points``."""
        if self.is_finite:
            return self.matrix[np.asarray(points, dtype=np.int64), int(q)]
        x = np.asarray(points, dtype=float)
        return np.broadcast_to(np.asarray(self.distance(x, float(q)), dtype=float), x.shape)

    def contains(self, p) -> bool:
        if self.is_finite:
            return isinstance(p, (int, np.integer)) and 0 <= p < len(self)
        lo, hi = self.domain
        return math.isfinite(p) and lo - EPS_EQ <= p <= hi + EPS_EQ

    def label(self, p) -> str:
        if self.is_finite:
            return self.labels[int(p)]
        return repr(float(p))

    def scaled(self, factor: float) -> "MetricSpaceModel":
        if self.is_finite:
            return MetricSpaceModel.from_matrix(self.matrix * factor, self.labels)
        fn = self.distance
        return MetricSpaceModel(
            "function",
            distance=lambda x, y: factor * np.asarray(fn(x, y)),
            domain=self.domain,
            sampler_n=self.sampler_n,
            sampler=self.sampler,
        )

    def permuted(self, perm: Sequence[int]) -> "MetricSpaceModel":
        """Relabeled copy: new point i is old point ``perm[i]``."""
        perm = np.asarray(perm)
        return MetricSpaceModel.from_matrix(
            self.matrix[np.ix_(perm, perm)], [self.labels[i] for i in perm]
        )


def _validate_matrix(D: np.ndarray) -> None:
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InstanceError(f"size mismatch: distance matrix has shape {D.shape}, expected square")
    if not np.all(np.isfinite(D)):
        raise InstanceError("non-finite distance entry")
    neg = np.argwhere(D < 0)
    if len(neg):
        i, j = neg[0]
        raise InstanceError(f"negative entry d[{i}][{j}] = {D[i, j]}")
    diag = np.flatnonzero(np.abs(np.diag(D)) > EPS_EQ)
    if len(diag):
        i = diag[0]
        raise InstanceError(f"nonzero diagonal d[{i}][{i}] = {D[i, i]}")
    asym = np.argwhere(D != D.T)
    if len(asym):
        i, j = asym[0]
        raise InstanceError(f"asymmetric: d[{i}][{j}] = {D[i, j]} but d[{j}][{i}] = {D[j, i]}")


@dataclass(frozen=True, eq=False)
class MapModel:
    """Self-map S, either a lookup table over point indices or an expression in x."""

    kind: str
    table: tuple[int, ...] | None = None
    expr: Expression | None = None

    @classmethod
    def from_table(cls, table: Sequence[int]) -> "MapModel":
        return cls("table", table=tuple(int(t) for t in table))

    @classmethod
    def from_expr(cls, source: str | Expression) -> "MapModel":
        if isinstance(source, str):
            source = compile_expression(source, ("x",))
        return cls("expr", expr=source)

    def __call__(self, p):
        if self.kind == "table":
            return self.table[int(p)]
        return self.expr(p)

    def image(self, points) -> np.ndarray:
        pts = np.asarray(points)
        if self.kind == "table":
            return np.asarray(self.table, dtype=np.int64)[pts]
        return np.asarray(self.expr(pts.astype(float)), dtype=float)

    @property
    def source(self) -> str:
        return self.expr.source if self.kind == "expr" else repr(list(self.table))


# ---------------------------------------------------------------------------
# reports


@dataclass
class AxiomReport:
    v: int
    s: float
    condition1_ok: bool
    condition2_ok: bool
    condition3_ok: bool
    worst_ratio: float | None
    witness: tuple | None
    tuples_checked: int
    mode: str
    vacuous: bool = False
    skipped_zero: int = 0
    n_points: int = 0
    seed: int | None = None
    witness_lhs: float | None = None
    witness_path: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.condition1_ok and self.condition2_ok and self.condition3_ok

    def describe_witness(self) -> str:
        if self.witness is None:
            return ""
        pts = ",".join(str(p) for p in self.witness)
        return f"({pts}): {_fmt(self.witness_lhs)} > {_fmt(self.s * self.witness_path)}"

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "s": self.s,
            "condition1_ok": self.condition1_ok,
            "condition2_ok": self.condition2_ok,
            "condition3_ok": self.condition3_ok,
            "worst_ratio": _tag(self.worst_ratio),
            "witness": list(self.witness) if self.witness is not None else None,
            "tuples_checked": self.tuples_checked,
            "skipped_zero": self.skipped_zero,
            "mode": self.mode,
            "vacuous": self.vacuous,
            "n_points": self.n_points,
            "seed": self.seed,
            "notes": list(self.notes),
        }


@dataclass
class SpaceSignature:
    v: int
    s: float
    complete: bool = False
    axiom_status: str = "declared"
    classes: tuple[str, ...] = ()
    witness: tuple | None = None
    n_samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.v < 1:
            raise ValueError(f"v must be a positive integer, got {self.v}")
        if not self.s >= 1:
            raise ValueError(f"s must be >= 1, got {self.s}")

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "s": _tag(self.s),
            "complete": self.complete,
            "axiom_status": self.axiom_status,
            "classes": list(self.classes),
            "witness": list(self.witness) if self.witness is not None else None,
            "n_samples": self.n_samples,
            "seed": self.seed,
        }


class MinimalS(NamedTuple):
    s: float
    witness: tuple | None
    label: str
    report: AxiomReport


def _tag(x):
    if x is not None and math.isinf(x):
        return "unbounded"
    return x


def _fmt(x) -> str:
    return f"{x:g}" if x is not None else "?"


# ---------------------------------------------------------------------------
# axiom checking


def admissible_tuple_count(n: int, v: int) -> int:
    """Number of tuples (u < w, z_1..z_v) scanned for an n-point set."""
    return n * (n - 1) // 2 * kernels.perm_count(n - 2, v) if n >= 2 else 0


def _scan(space: MetricSpaceModel, v: int, budget: int, seed: int) -> AxiomReport:
    if v < 1:
        raise ValueError(f"v must be a positive integer, got {v}")
    if budget < 1:
        raise ValueError("budget must be >= 1")

    if space.is_finite:
        points = space.points()
        D = np.ascontiguousarray(space.matrix)
        sym_tol = 0.0
    else:
        points = space.sample(space.sampler_n, seed)
        D = space.pairwise(points)
        sym_tol = EPS_EQ
    n = len(points)
    notes = []

    off = ~np.eye(n, dtype=bool)
    cond1 = bool(
        np.all(np.abs(np.diag(D)) <= EPS_EQ) and np.all(D[off] > EPS_EQ) and np.all(D >= 0)
    )
    if not cond1:
        notes.append("separation violated: zero off-diagonal, nonzero diagonal or negative distance")
    cond2 = bool(np.all(np.abs(D - D.T) <= sym_tol))
    if not cond2:
        notes.append("symmetry violated: asymmetric distances")
    if not space.is_finite:
        notes.append(f"function-backed: checked on {n} sampled points")

    total = admissible_tuple_count(n, v)
    report = AxiomReport(
        v=v, s=1.0, condition1_ok=cond1, condition2_ok=cond2, condition3_ok=True,
        worst_ratio=None, witness=None, tuples_checked=0, mode="exhaustive",
        n_points=n, seed=None if space.is_finite else seed, notes=notes,
    )
    if total == 0:
        report.vacuous = True
        report.notes.append(f"vacuous: no {v} distinct intermediates exist among {n} points")
        return report

    if total <= budget:
        worst, wit, checked, skipped = kernels.axiom_scan(D, v, EPS_EQ)
    else:
        if total >= 2**63:
            raise ValueError(f"tuple space of size {total} is too large to index")
        rng = np.random.default_rng([seed, 1])
        idx = np.sort(rng.choice(total, size=budget, replace=False)).astype(np.int64)
        worst, wit, checked, skipped = kernels.axiom_scan_indices(D, v, idx, EPS_EQ)
        report.mode = "sampled"
        report.seed = seed

    report.tuples_checked = int(checked)
    report.skipped_zero = int(skipped)
    if wit is not None:
        report.worst_ratio = float(worst)
        report.witness = tuple(_point_value(space, points[i]) for i in wit)
        u, w, *z = wit
        chain = [u, *z, w]
        report.witness_lhs = float(D[u, w])
        report.witness_path = float(sum(D[a, b] for a, b in zip(chain, chain[1:])))
    return report


def _point_value(space: MetricSpaceModel, p):
    return space.labels[int(p)] if space.is_finite else float(p)


def check_axioms(
    space: MetricSpaceModel,
    v: int,
    s: float,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> AxiomReport:
    """Check separation, symmetry and the polygon inequality of a b_v(s) space.

    Finite spaces are enumerated exhaustively when the admissible tuple count
    fits in ``budget``; otherwise ``budget`` tuples are drawn uniformly without
    replacement (seeded).  Function-backed spaces are checked on
    ``space.sampler_n`` sampled points.
    """
    if not s >= 1:
        raise ValueError(f"s must be >= 1, got {s}")
    report = _scan(space, v, budget, seed)
    report.s = float(s)
    if report.worst_ratio is not None:
        report.condition3_ok = report.worst_ratio <= s * (1 + EPS_CHECK)
    return report


def minimal_s(
    space: MetricSpaceModel, v: int, budget: int = DEFAULT_BUDGET, seed: int = 0
) -> MinimalS:
    """Smallest s for which the polygon inequality holds on the checked tuples.

    In sampled mode the value is a lower bound on the true minimum.
    """
    report = _scan(space, v, budget, seed)
    if report.vacuous:
        label = "vacuous"
    elif report.worst_ratio is not None and math.isinf(report.worst_ratio):
        label = "unbounded"
    elif report.mode == "sampled":
        label = "lower-bound"
    else:
        label = "exact"
    s_min = max(1.0, report.worst_ratio) if report.worst_ratio is not None else 1.0
    report.s = s_min
    report.condition3_ok = not math.isinf(s_min)
    return MinimalS(s_min, report.witness, label, report)


def classify_space(
    space: MetricSpaceModel,
    v_grid: Sequence[int],
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    complete: bool = False,
) -> list[SpaceSignature]:
    if not v_grid:
        raise ValueError("v_grid must be nonempty")
    out = []
    for v in v_grid:
        res = minimal_s(space, v, budget, seed)
        rep = res.report
        valid = rep.condition1_ok and rep.condition2_ok and res.label != "unbounded"
        classes: list[str] = []
        unit = valid and res.s <= 1 + EPS_CHECK
        if valid:
            classes.append("b_v(s)")
            if v == 1:
                classes.append("b-metric")
                if unit:
                    classes.append("metric")
            if v == 2:
                classes.append("rectangular b-metric")
                if unit:
                    classes.append("rectangular")
            if unit:
                classes.append("v-generalized")
        if not valid:
            status = "failed"
        elif res.label == "vacuous":
            status = "vacuous"
        elif rep.mode == "sampled" or not space.is_finite:
            status = "verified-sampled"
        else:
            status = "verified-exhaustive"
        out.append(
            SpaceSignature(
                v=v,
                s=res.s,
                complete=complete,
                axiom_status=status,
                classes=tuple(classes),
                witness=res.witness,
                n_samples=rep.tuples_checked if rep.mode == "sampled" else None,
                seed=rep.seed,
            )
        )
    return out


# ---------------------------------------------------------------------------
# instance files


class Instance(NamedTuple):
    space: MetricSpaceModel
    map: MapModel | None
    signature: SpaceSignature
    phi: str | None = None


def _reject_constant(name):
    raise InstanceError(f"non-decimal constant {name!r} not allowed")


def parse_instance(document: str) -> Instance:
    """Parse a JSON instance document (see README for the schema)."""
    try:
        data = json.loads(document, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InstanceError(
            f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(data, dict) or "space" not in data:
        raise InstanceError("top-level object with a 'space' key required")
    sp = data["space"]
    if not isinstance(sp, dict):
        raise InstanceError("'space' must be an object")

    mp = data.get("map")
    if mp is not None and not isinstance(mp, dict):
        raise InstanceError("'map' must be an object")
    domain = data.get("domain") or (mp or {}).get("domain")

    if "d" in sp:
        d = sp["d"]
        if not isinstance(d, list) or not all(isinstance(r, list) for r in d):
            raise InstanceError("'space.d' must be a list of rows")
        if any(len(r) != len(d) for r in d):
            raise InstanceError("size mismatch: distance matrix rows must all have length n")
        if not all(_is_real(x) for r in d for x in r):
            raise InstanceError("distance entries must be decimal numbers")
        labels = sp.get("points")
        if labels is None:
            labels = [str(i) for i in range(len(d))]
        if not isinstance(labels, list):
            raise InstanceError("'space.points' must be a list")
        space = MetricSpaceModel.from_matrix(d, labels)
    else:
        if domain is None:
            raise InstanceError("function-backed space requires 'domain' {lo, hi, sampler_n}")
        try:
            space = MetricSpaceModel.from_function(
                sp.get("d_expr", "abs(x - y)"),
                lo=_real(domain, "lo"),
                hi=_real(domain, "hi"),
                sampler_n=int(domain.get("sampler_n", 200)),
                sampler=domain.get("sampler", "random"),
            )
        except ExpressionSyntaxError as exc:
            raise InstanceError(f"space.d_expr: {exc}") from None

    try:
        signature = SpaceSignature(
            v=int(sp.get("v", 1)),
            s=float(sp.get("s", 1.0)),
            complete=bool(sp.get("complete", False)),
        )
    except ValueError as exc:
        raise InstanceError(str(exc)) from None

    smap = None
    if mp is not None:
        if "table" in mp:
            table = mp["table"]
            if not space.is_finite:
                raise InstanceError("table map requires a matrix-backed space")
            if not isinstance(table, list) or len(table) != len(space):
                raise InstanceError(f"size mismatch: map table must have {len(space)} entries")
            if not all(isinstance(t, int) and 0 <= t < len(space) for t in table):
                raise InstanceError("map table entries must be point indices")
            smap = MapModel.from_table(table)
        elif "expr" in mp:
            if space.is_finite:
                raise InstanceError("expression map requires a function-backed space")
            try:
                smap = MapModel.from_expr(mp["expr"])
            except ExpressionSyntaxError as exc:
                raise InstanceError(f"map.expr: {exc}") from None
        else:
            raise InstanceError("'map' needs either 'table' or 'expr'")

    phi = data.get("phi")
    if phi is not None and not isinstance(phi, str):
        raise InstanceError("'phi' must be an expression string")
    return Instance(space, smap, signature, phi)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _real(obj: dict, key: str) -> float:
    if key not in obj or not _is_real(obj[key]):
        raise InstanceError(f"domain.{key} must be a decimal number")
    return float(obj[key])


def load_instance(path: str | Path) -> Instance:
    return parse_instance(Path(path).read_text())


def dump_instance(
    space: MetricSpaceModel,
    smap: MapModel | None = None,
    signature: SpaceSignature | None = None,
    phi: str | None = None,
) -> str:
    """Serialize to the instance format accepted by :func:`parse_instance`.

    Without a signature the instance declares v = 1, s = 1, incomplete.
    """
    signature = signature or SpaceSignature(v=1, s=1.0)
    sp: dict = {"v": signature.v, "s": signature.s, "complete": signature.complete}
    doc: dict = {"space": sp}
    if space.is_finite:
        sp["points"] = list(space.labels)
        sp["d"] = space.matrix.tolist()
    else:
        if space.d_source is None:
            raise ValueError("function-backed space without an expression cannot be exported")
        sp["d_expr"] = space.d_source
        lo, hi = space.domain
        doc["domain"] = {"lo": lo, "hi": hi, "sampler_n": space.sampler_n, "sampler": space.sampler}
    if smap is not None:
        doc["map"] = {"table": list(smap.table)} if smap.kind == "table" else {"expr": smap.source}
    if phi is not None:
        doc["phi"] = phi
    return json.dumps(doc, indent=2)
