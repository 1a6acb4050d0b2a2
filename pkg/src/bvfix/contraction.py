"""Contraction-type classification of self-maps.

Three conditions are estimated over a finite pair source:

* Banach:  d(Su, Sw) <= c d(u, w)
* Kannan:  d(Su, Sw) <= gamma [d(u, Su) + d(w, Sw)]
* weak:    d(Su, Sw) <= d(u, w) - phi(d(u, w))

where phi is a comparison modulus (nondecreasing, continuous, phi(t) = 0
iff t = 0).  Estimates are suprema over the pairs actually checked, so they
are evidence, not proofs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from bvfix._backend import kernels
from bvfix.constants import EPS_CHECK, EPS_EQ, MODULUS_GRID_POINTS
from bvfix.expr import Expression, compile_expression
from bvfix.space import MapModel, MetricSpaceModel, SpaceSignature

__all__ = [
    "ContractionReport",
    "Estimate",
    "HypothesisReport",
    "InvalidModulusError",
    "Modulus",
    "ModulusReport",
    "PairSource",
    "analyze_map",
    "check_hypotheses",
    "check_weak_contractive",
    "default_modulus_grid",
    "estimate_banach_c",
    "estimate_kannan_gamma",
    "validate_modulus",
]


class InvalidModulusError(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    """Supremum estimate; ``value`` is ``math.inf`` for an unbounded verdict."""

    value: float
    witness: tuple | None = None

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.value)

    def report_value(self):
        return "unbounded" if self.unbounded else self.value

    def __format__(self, spec):
        return "unbounded" if self.unbounded else format(self.value, spec or "g")


# ---------------------------------------------------------------------------
# moduli


@dataclass(frozen=True, eq=False)
class Modulus:
    kind: str
    params: tuple = ()
    expr: Expression | None = None

    @classmethod
    def linear(cls, c: float) -> "Modulus":
        return cls("linear", (float(c),))

    @classmethod
    def power(cls, a: float, b: float) -> "Modulus":
        return cls("power", (float(a), float(b)))

    @classmethod
    def table(cls, ts: Sequence[float], values: Sequence[float]) -> "Modulus":
        ts, values = tuple(map(float, ts)), tuple(map(float, values))
        if len(ts) != len(values) or len(ts) < 2:
            raise InvalidModulusError("table modulus needs >= 2 matching (t, phi) pairs")
        if ts[0] != 0.0 or values[0] != 0.0:
            raise InvalidModulusError("table modulus must start at (0, 0)")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidModulusError("table modulus abscissae must increase")
        return cls("table", (ts, values))

    @classmethod
    def expression(cls, source: str) -> "Modulus":
        return cls("expression", (source,), compile_expression(source, ("t",)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            out = self.params[0] * t
        elif self.kind == "power":
            a, b = self.params
            out = a * np.power(t, b)
        elif self.kind == "table":
            ts, vals = self.params
            out = np.interp(t, ts, vals)
            slope = (vals[-1] - vals[-2]) / (ts[-1] - ts[-2])
            out = np.where(t > ts[-1], vals[-1] + slope * (t - ts[-1]), out)
        else:
            out = np.asarray(self.expr(t), dtype=float)
        return float(out) if out.ndim == 0 else out

    def __str__(self) -> str:
        if self.kind == "linear":
            return f"{self.params[0]:g}*t"
        if self.kind == "power":
            return f"{self.params[0]:g}*t^{self.params[1]:g}"
        if self.kind == "table":
            return f"table{list(zip(*self.params))}"
        return self.params[0]


@dataclass
class ModulusReport:
    valid: bool
    zero_ok: bool
    positive_ok: bool
    monotone_ok: bool
    continuity: str = "sampled-only"
    continuity_ok: bool = True
    jump_suspects: list[float] = field(default_factory=list)
    witness: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "zero_ok": self.zero_ok,
            "positive_ok": self.positive_ok,
            "monotone_ok": self.monotone_ok,
            "continuity": self.continuity,
            "continuity_ok": self.continuity_ok,
            "jump_suspects": list(self.jump_suspects),
            "witness": self.witness,
            "error": self.error,
        }


def default_modulus_grid(diameter: float, n: int = MODULUS_GRID_POINTS) -> np.ndarray:
    """0 followed by ``n`` geometrically spaced points in [EPS_EQ, diameter]."""
    diameter = max(float(diameter), 1.0)
    return np.concatenate([[0.0], np.geomspace(EPS_EQ, diameter, n)])


def _jump_location(phi: Modulus, a: float, b: float, fa: float, fb: float) -> float | None:
    # Bisect toward the half carrying the larger increment; a jump survives
    # refinement, a continuous increment shrinks with the interval.
    jump = abs(fb - fa)
    for _ in range(40):
        m = 0.5 * (a + b)
        if not a < m < b:
            break
        fm = float(phi(m))
        if abs(fm - fa) >= abs(fb - fm):
            b, fb = m, fm
        else:
            a, fa = m, fm
    rest = abs(fb - fa)
    if rest > 0.5 * jump and rest > EPS_CHECK * (1.0 + abs(fb)):
        return 0.5 * (a + b)
    return None


def validate_modulus(phi: Modulus, grid=None) -> ModulusReport:
    """Check phi(0) = 0, positivity, monotonicity and (sampled) continuity."""
    grid = default_modulus_grid(1.0) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] != 0.0 or grid.min() < 0:
        raise ValueError("grid must be increasing, start at 0 and stay nonnegative")
    if np.count_nonzero(grid > 0) < 16:
        raise ValueError("grid needs at least 16 positive points")
    try:
        vals = np.asarray(phi(grid), dtype=float)
    except Exception as exc:  # noqa: BLE001 - any evaluation failure is reported
        return ModulusReport(False, False, False, False, error=f"evaluation failed: {exc}")
    bad = np.flatnonzero(~np.isfinite(vals))
    if len(bad):
        t = float(grid[bad[0]])
        return ModulusReport(
            False, False, False, False, witness=t, error=f"evaluation failed at t={t:g}"
        )

    zero_ok = abs(vals[0]) <= EPS_EQ
    neg = np.flatnonzero(vals[1:] <= 0)
    positive_ok = len(neg) == 0
    drops = np.flatnonzero(np.diff(vals) < -EPS_CHECK * np.maximum(1.0, np.abs(vals[:-1])))
    monotone_ok = len(drops) == 0
    witness = None
    if not zero_ok:
        witness = 0.0
    elif not positive_ok:
        witness = float(grid[1 + neg[0]])
    elif not monotone_ok:
        witness = float(grid[drops[0] + 1])

    suspects = []
    for i in range(len(grid) - 1):
        if vals[i + 1] != vals[i]:
            loc = _jump_location(phi, grid[i], grid[i + 1], vals[i], vals[i + 1])
            if loc is not None:
                suspects.append(loc)
    continuity_ok = not suspects
    return ModulusReport(
        valid=bool(zero_ok and positive_ok and monotone_ok and continuity_ok),
        zero_ok=bool(zero_ok),
        positive_ok=positive_ok,
        monotone_ok=monotone_ok,
        continuity_ok=continuity_ok,
        jump_suspects=suspects,
        witness=witness,
    )


# ---------------------------------------------------------------------------
# pair sources


@dataclass(frozen=True, eq=False)
class PairSource:
    """Finite point set whose unordered pairs are all checked."""

    points: np.ndarray
    mode: str
    seed: int | None = None

    @classmethod
    def exhaustive(cls, space: MetricSpaceModel) -> "PairSource":
        return cls(space.points(), "exhaustive")

    @classmethod
    def grid(cls, points) -> "PairSource":
        return cls(np.asarray(points, dtype=float), "grid")

    @classmethod
    def sampled(cls, space: MetricSpaceModel, n: int, seed: int = 0) -> "PairSource":
        if space.is_finite:
            n = min(n, len(space))
            pts = np.sort(np.random.default_rng(seed).choice(len(space), size=n, replace=False))
            return cls(pts, "sampled", seed)
        return cls(space.sample(n, seed), "sampled", seed)

    @classmethod
    def default(cls, space: MetricSpaceModel, seed: int = 0) -> "PairSource":
        if space.is_finite:
            return cls.exhaustive(space)
        if space.sampler == "grid":
            return cls.grid(space.sample(space.sampler_n))
        return cls.sampled(space, space.sampler_n, seed)

    @property
    def n_pairs(self) -> int:
        n = len(self.points)
        return n * (n - 1) // 2


@dataclass
class _PairArrays:
    points: np.ndarray
    D: np.ndarray
    DS: np.ndarray
    R: np.ndarray


def _pair_arrays(space: MetricSpaceModel, smap: MapModel, pairs: PairSource) -> _PairArrays:
    pts = pairs.points
    img = smap.image(pts)
    D = space.pairwise(pts)
    DS = space.pairwise(img)
    if space.is_finite:
        R = space.matrix[pts, img]
    else:
        R = np.asarray(space.distance(pts.astype(float), img), dtype=float)
    return _PairArrays(pts, D, DS, np.ascontiguousarray(R, dtype=float))


def _witness(arr: _PairArrays, i: int, j: int) -> tuple | None:
    if i < 0:
        return None
    return (_py(arr.points[i]), _py(arr.points[j]))


def _py(x):
    return int(x) if isinstance(x, (np.integer, int)) else float(x)


def _banach(arr: _PairArrays) -> Estimate:
    value, i, j = kernels.banach_scan(arr.D, arr.DS, EPS_EQ)
    return Estimate(max(float(value), 0.0), _witness(arr, i, j))


def _kannan(arr: _PairArrays) -> Estimate:
    value, i, j = kernels.kannan_scan(arr.DS, arr.R, EPS_EQ)
    return Estimate(max(float(value), 0.0), _witness(arr, i, j))


@dataclass
class WeakResult:
    weak_ok: bool
    min_slack: float
    min_rel_slack: float
    witness: tuple | None
    modulus: ModulusReport

    def __iter__(self):
        return iter((self.weak_ok, self.min_slack, self.witness))


def _weak(arr: _PairArrays, phi: Modulus) -> tuple[float, tuple | None, float, tuple | None]:
    PHI = np.ascontiguousarray(phi(arr.D), dtype=float)
    low, li, lj, low_rel, ri, rj = kernels.weak_scan(arr.D, arr.DS, PHI, EPS_EQ)
    return float(low), _witness(arr, li, lj), float(low_rel), _witness(arr, ri, rj)


def estimate_banach_c(
    space: MetricSpaceModel, smap: MapModel, pairs: PairSource | None = None
) -> Estimate:
    """sup d(Su, Sw) / d(u, w) over pairs with d(u, w) > EPS_EQ."""
    return _banach(_pair_arrays(space, smap, pairs or PairSource.default(space)))


def estimate_kannan_gamma(
    space: MetricSpaceModel, smap: MapModel, pairs: PairSource | None = None
) -> Estimate:
    """sup d(Su, Sw) / (d(u, Su) + d(w, Sw)); pairs of two fixed points mapping apart are unbounded."""
    return _kannan(_pair_arrays(space, smap, pairs or PairSource.default(space)))


def _require_valid(phi: Modulus, arr: _PairArrays) -> ModulusReport:
    diameter = float(arr.D.max()) if arr.D.size else 1.0
    rep = validate_modulus(phi, default_modulus_grid(diameter))
    if not rep.valid:
        raise InvalidModulusError(f"modulus {phi} is not a valid comparison function: {rep.to_dict()}")
    return rep


def check_weak_contractive(
    space: MetricSpaceModel,
    smap: MapModel,
    phi: Modulus,
    pairs: PairSource | None = None,
) -> WeakResult:
    """Weak-contraction verdict; unpacks as ``(weak_ok, min_slack, witness)``.

    A pair passes when its slack ``d - phi(d) - d(Su, Sw)`` is at least
    ``-EPS_CHECK * d``, so the verdict agrees with ``c_hat <= c`` for the
    linear modulus ``phi(t) = (1 - c) t``.
    """
    arr = _pair_arrays(space, smap, pairs or PairSource.default(space))
    mrep = _require_valid(phi, arr)
    low, wit, low_rel, rel_wit = _weak(arr, phi)
    if wit is None:
        return WeakResult(True, 0.0, 0.0, None, mrep)
    ok = low_rel >= -EPS_CHECK
    return WeakResult(ok, low, low_rel, wit if ok else rel_wit, mrep)


# ---------------------------------------------------------------------------
# combined report and theorem hypotheses


@dataclass
class ContractionReport:
    banach_c: Estimate
    kannan_gamma: Estimate
    pairs_checked: int
    mode: str
    seed: int | None = None
    weak_ok: bool | None = None
    min_slack: float | None = None
    min_rel_slack: float | None = None
    weak_witness: tuple | None = None
    phi: str | None = None
    phi_valid: bool | None = None

    def to_dict(self) -> dict:
        return {
            "banach_c": self.banach_c.report_value(),
            "banach_witness": _list(self.banach_c.witness),
            "kannan_gamma": self.kannan_gamma.report_value(),
            "kannan_witness": _list(self.kannan_gamma.witness),
            "weak_ok": self.weak_ok,
            "min_slack": self.min_slack,
            "weak_witness": _list(self.weak_witness),
            "phi": self.phi,
            "phi_valid": self.phi_valid,
            "pairs_checked": self.pairs_checked,
            "mode": self.mode,
            "seed": self.seed,
        }


def _list(t):
    return list(t) if t is not None else None


def analyze_map(
    space: MetricSpaceModel,
    smap: MapModel,
    phi: Modulus | None = None,
    pairs: PairSource | None = None,
) -> ContractionReport:
    """All estimates over one pair source (distance matrices built once)."""
    pairs = pairs or PairSource.default(space)
    arr = _pair_arrays(space, smap, pairs)
    report = ContractionReport(
        banach_c=_banach(arr),
        kannan_gamma=_kannan(arr),
        pairs_checked=pairs.n_pairs,
        mode=pairs.mode,
        seed=pairs.seed,
    )
    if phi is not None:
        diameter = float(arr.D.max()) if arr.D.size else 1.0
        mrep = validate_modulus(phi, default_modulus_grid(diameter))
        report.phi = str(phi)
        report.phi_valid = mrep.valid
        low, wit, low_rel, rel_wit = _weak(arr, phi)
        if wit is None:
            report.weak_ok, report.min_slack, report.min_rel_slack = mrep.valid, 0.0, 0.0
        else:
            ok = low_rel >= -EPS_CHECK
            report.weak_ok = bool(ok and mrep.valid)
            report.min_slack, report.min_rel_slack = low, low_rel
            report.weak_witness = wit if ok else rel_wit
    return report


@dataclass
class HypothesisReport:
    theorem: str
    satisfied: bool
    details: list[tuple[str, bool]]

    def failed(self) -> list[str]:
        return [name for name, ok in self.details if not ok]

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "satisfied": self.satisfied,
            "details": [[name, ok] for name, ok in self.details],
        }


def check_hypotheses(
    signature: SpaceSignature,
    report: ContractionReport,
    phi: Modulus | None = None,
    theorem: str = "B",
) -> HypothesisReport:
    """Evaluate the hypotheses of the weak-contraction (A) or Kannan (B) theorem.

    Unmet hypotheses are verdicts, not errors: the theorems are sufficient
    conditions only.
    """
    complete = ("space complete (declared)", bool(signature.complete))
    if theorem == "A":
        if phi is not None:
            phi_ok = validate_modulus(phi).valid
        else:
            phi_ok = bool(report.phi_valid)
        details = [
            ("weakly contractive", bool(report.weak_ok)),
            ("φ valid", phi_ok),
            complete,
        ]
    elif theorem == "B":
        g = report.kannan_gamma
        details = [
            ("γ < 1/2", (not g.unbounded) and g.value < 0.5),
            ("sγ ≤ 1", (not g.unbounded) and signature.s * g.value <= 1 + EPS_CHECK),
            complete,
        ]
    else:
        raise ValueError(f"theorem must be 'A' or 'B', got {theorem!r}")
    return HypothesisReport(theorem, all(ok for _, ok in details), details)
