"""Picard iteration u_{n+1} = S u_n and checks of its quantitative bounds.

Convergence is judged from distances d(u_n, u_{n+1}) and the residual
d(u*, S u*), never from coordinates: a b_v(s) distance need not be
continuous, so coordinate closeness proves nothing about it.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np

from bvfix.constants import (
    DEFAULT_CYCLE_WINDOW,
    DEFAULT_MAX_ITER,
    DEFAULT_P_WINDOW,
    DEFAULT_TOL_FIXED,
    DEFAULT_TOL_STEP,
    DEFAULT_TOL_UNIQUE,
    EPS_CHECK,
    EPS_EQ,
)
from bvfix.contraction import Modulus
from bvfix.space import DomainEscapeError, MapModel, MetricSpaceModel, SpaceSignature

__all__ = [
    "BoundCheck",
    "InsufficientTailError",
    "IterationTrace",
    "KannanBoundReport",
    "ResidualVerdict",
    "Status",
    "StoppingCriteria",
    "UniquenessVerdict",
    "WeakDecreaseReport",
    "check_decrease",
    "check_uniqueness",
    "kannan_gap_bound",
    "kannan_rate_bound",
    "picard",
    "verify_kannan_bounds",
    "verify_residual",
    "verify_weak_decrease",
    "write_trace_csv",
]


class InsufficientTailError(ValueError):
    pass


@dataclass(frozen=True)
class StoppingCriteria:
    tol_step: float = DEFAULT_TOL_STEP
    max_iter: int = DEFAULT_MAX_ITER
    cycle_window: int = DEFAULT_CYCLE_WINDOW

    def __post_init__(self):
        if not self.tol_step > 0:
            raise ValueError("tol_step must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.cycle_window < 0:
            raise ValueError("cycle_window must be >= 0")


@dataclass(frozen=True)
class Status:
    kind: str  # "converged" | "max_iter" | "cycle"
    fixed_point: object = None
    residual: float | None = None
    cycle: tuple[int, int] | None = None

    @property
    def converged(self) -> bool:
        return self.kind == "converged"

    def __str__(self) -> str:
        if self.kind == "converged":
            return f"Converged(u*={self.fixed_point!r}, residual={self.residual:.3g})"
        if self.kind == "cycle":
            return f"CycleDetected{self.cycle}"
        return "MaxIter"


@dataclass(eq=False)
class IterationTrace:
    space: MetricSpaceModel
    map: MapModel
    stop: StoppingCriteria
    iterates: list = field(default_factory=list)
    step_dist: list[float] = field(default_factory=list)
    status: Status | None = None
    _gaps: dict = field(default_factory=dict, repr=False)

    def gap(self, p: int) -> list[float]:
        """alpha_n = d(u_n, u_{n+p}) for every n with n + p in range."""
        if p < 1:
            raise ValueError("p must be >= 1")
        if p == 1:
            return list(self.step_dist)
        if p not in self._gaps:
            its = self.iterates
            self._gaps[p] = [self.space.d(its[n], its[n + p]) for n in range(len(its) - p)]
        return self._gaps[p]

    @property
    def last(self):
        return self.iterates[-1]


def picard(
    space: MetricSpaceModel,
    smap: MapModel,
    u0,
    stop: StoppingCriteria | None = None,
) -> IterationTrace:
    stop = stop or StoppingCriteria()
    u = int(u0) if space.is_finite else float(u0)
    if not space.contains(u):
        raise DomainEscapeError(0, u)
    trace = IterationTrace(space, smap, stop, iterates=[u])
    for n in range(stop.max_iter):
        nxt = smap(u)
        nxt = int(nxt) if space.is_finite else float(nxt)
        if not space.contains(nxt):
            raise DomainEscapeError(n + 1, nxt)
        step = space.d(u, nxt)
        trace.iterates.append(nxt)
        trace.step_dist.append(step)
        if step <= EPS_EQ:
            # u_n = u_{n+1}: u_n is a fixed point
            trace.status = Status("converged", u, space.d(u, nxt))
            return trace
        if step < stop.tol_step:
            trace.status = Status("converged", nxt, space.d(nxt, smap(nxt)))
            return trace
        last = len(trace.iterates) - 1
        lo = max(0, last - stop.cycle_window)
        if lo < last:
            window = trace.iterates[lo:last]
            if space.is_finite:
                hits = np.flatnonzero(np.asarray(window) == nxt)
            else:
                hits = np.flatnonzero(space.distances_to(window, nxt) <= EPS_EQ)
            if len(hits):
                trace.status = Status("cycle", cycle=(lo + int(hits[-1]), last))
                return trace
        u = nxt
    trace.status = Status("max_iter")
    return trace


# ---------------------------------------------------------------------------
# a priori bounds for Kannan maps


def _check_gamma(gamma: float) -> float:
    if not 0 <= gamma < 0.5:
        raise ValueError(f"gamma must lie in [0, 1/2), got {gamma}")
    return gamma / (1 - gamma)


def kannan_rate_bound(gamma: float, d0: float, n: int) -> float:
    """(gamma / (1 - gamma))**n * d0: bound on d(u_n, u_{n+1})."""
    q = _check_gamma(gamma)
    if n < 0:
        raise ValueError("n must be >= 0")
    return q**n * d0


def kannan_gap_bound(gamma: float, d0: float, n: int, p: int) -> float:
    """gamma * [q**(n-1) + q**(n+p-1)] * d0 with q = gamma/(1-gamma): bound on d(u_n, u_{n+p})."""
    q = _check_gamma(gamma)
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    return gamma * (q ** (n - 1) + q ** (n + p - 1)) * d0


@dataclass
class BoundCheck:
    kind: str
    n: int
    p: int
    actual: float
    bound: float
    ok: bool


@dataclass
class KannanBoundReport:
    gamma: float
    checks: list[BoundCheck]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def violations(self) -> list[BoundCheck]:
        return [c for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        bad = self.violations()
        return {
            "gamma": self.gamma,
            "ok": self.ok,
            "checked": len(self.checks),
            "violations": [[c.kind, c.n, c.p, c.actual, c.bound] for c in bad[:20]],
        }


def verify_kannan_bounds(
    trace: IterationTrace,
    gamma: float,
    p_window: Sequence[int] = DEFAULT_P_WINDOW,
    atol: float = EPS_CHECK,
) -> KannanBoundReport:
    _check_gamma(gamma)
    checks: list[BoundCheck] = []
    steps = trace.step_dist
    if not steps:
        return KannanBoundReport(gamma, checks)
    d0 = steps[0]
    for n, step in enumerate(steps):
        bound = kannan_rate_bound(gamma, d0, n)
        checks.append(BoundCheck("rate", n, 1, step, bound, step <= bound + atol))
    for p in p_window:
        alphas = trace.gap(p)
        for n in range(1, len(alphas)):
            bound = kannan_gap_bound(gamma, d0, n, p)
            checks.append(BoundCheck("gap", n, p, alphas[n], bound, alphas[n] <= bound + atol))
    return KannanBoundReport(gamma, checks)


# ---------------------------------------------------------------------------
# monotone decrease for weakly contractive maps


@dataclass
class DecreaseCheck:
    n: int
    p: int
    alpha: float
    alpha_next: float
    slack: float
    ok: bool


@dataclass
class WeakDecreaseReport:
    checks: list[DecreaseCheck]
    monotone_ok: bool
    tail_ok: bool
    notes: list[str] = field(default_factory=list)

    @property
    def decrease_ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def ok(self) -> bool:
        return self.decrease_ok and self.monotone_ok and self.tail_ok

    @property
    def min_slack(self) -> float:
        return min((c.slack for c in self.checks), default=0.0)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "monotone_ok": self.monotone_ok,
            "tail_ok": self.tail_ok,
            "min_slack": self.min_slack,
            "checked": len(self.checks),
            "violations": [[c.n, c.p, c.slack] for c in self.checks if not c.ok][:20],
            "notes": self.notes,
        }


def check_decrease(
    alphas: Sequence[float], phi: Modulus | Callable, p: int = 1, atol: float = EPS_CHECK
) -> tuple[list[DecreaseCheck], bool]:
    """alpha_{n+1} <= alpha_n - phi(alpha_n) for a raw sequence, plus monotonicity."""
    checks = []
    monotone = True
    for n in range(len(alphas) - 1):
        a, b = alphas[n], alphas[n + 1]
        slack = a - float(phi(a)) - b
        checks.append(DecreaseCheck(n, p, a, b, slack, slack >= -atol))
        monotone &= b <= a + atol
    return checks, monotone


def verify_weak_decrease(
    trace: IterationTrace,
    phi: Modulus,
    p_window: Sequence[int] = DEFAULT_P_WINDOW,
    atol: float = EPS_CHECK,
    tol_final: float | None = None,
) -> WeakDecreaseReport:
    """Check the gap sequences alpha_n = d(u_n, u_{n+p}) shrink by at least phi(alpha_n).

    The tail check requires the last alpha for each p to be below
    ``tol_final`` (default ``10 * p * tol_step``).
    """
    checks: list[DecreaseCheck] = []
    monotone = tail = True
    notes = [f"p window {list(p_window)}"]
    for p in p_window:
        if len(trace.iterates) < p + 1:
            raise InsufficientTailError(f"trace too short for p={p}")
        alphas = trace.gap(p)
        c, mono = check_decrease(alphas, phi, p, atol)
        checks.extend(c)
        monotone &= mono
        limit = tol_final if tol_final is not None else 10 * p * trace.stop.tol_step
        if alphas and alphas[-1] > limit:
            tail = False
            notes.append(f"p={p}: final alpha {alphas[-1]:.3g} above {limit:.3g}")
    return WeakDecreaseReport(checks, monotone, tail, notes)


# ---------------------------------------------------------------------------
# residual and uniqueness


@dataclass
class ResidualVerdict:
    status: str  # "pass" | "fail" | "degenerate"
    residual: float
    bound: float | None
    tol_fixed: float
    n: int

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "residual": self.residual,
            "bound": self.bound,
            "tol_fixed": self.tol_fixed,
            "n": self.n,
        }


def verify_residual(
    space: MetricSpaceModel,
    signature: SpaceSignature,
    trace: IterationTrace,
    u_star=None,
    *,
    gamma: float | None = None,
    phi: Modulus | None = None,
    tol_fixed: float = DEFAULT_TOL_FIXED,
    atol: float = EPS_CHECK,
) -> ResidualVerdict:
    """Bound d(u*, S u*) through the polygon u*, u_{n+1}, ..., u_{n+v}, S u*.

    With n = N - v (N the last trace index) the right-hand side is::

        s [d(u*, u_{n+1}) + sum_{k=1}^{v-1} d(u_{n+k}, u_{n+k+1}) + tail]

    where ``tail`` is ``gamma d(u_{n+v-1}, u_{n+v})`` for a Kannan map
    (divided through by 1 - s gamma) or ``d(u_{n+v-1}, u*) - phi(...)`` for a
    weakly contractive one.
    """
    if (gamma is None) == (phi is None):
        raise ValueError("pass exactly one of gamma or phi")
    v, s = signature.v, signature.s
    its = trace.iterates
    if len(its) < v + 1:
        raise InsufficientTailError(f"trace has {len(its)} points, need at least v+1 = {v + 1}")
    u = trace.last if u_star is None else u_star
    su = trace.map(u)
    residual = space.d(u, su)
    n = len(its) - 1 - v
    chain = space.d(u, its[n + 1])
    for k in range(1, v):
        chain += space.d(its[n + k], its[n + k + 1])

    if gamma is not None:
        tail = gamma * space.d(its[n + v - 1], its[n + v])
        if s * gamma >= 1:
            # 1 - s*gamma <= 0: the bound says nothing; residual reported as is
            return ResidualVerdict("degenerate", residual, None, tol_fixed, n)
        bound = s * (chain + tail) / (1 - s * gamma)
    else:
        a = space.d(its[n + v - 1], u)
        bound = s * (chain + a - float(phi(a)))
    ok = residual <= bound + atol * max(1.0, bound) and residual <= tol_fixed
    return ResidualVerdict("pass" if ok else "fail", residual, bound, tol_fixed, n)


@dataclass
class UniquenessVerdict:
    status: str  # "pass" | "fail" | "inconclusive"
    limits: list
    max_gap: float | None
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "limits": list(self.limits),
            "max_gap": self.max_gap,
            "failures": [[str(s), str(st)] for s, st in self.failures],
        }


def check_uniqueness(
    space: MetricSpaceModel,
    smap: MapModel,
    starts: Sequence,
    stop: StoppingCriteria | None = None,
    tol_unique: float = DEFAULT_TOL_UNIQUE,
) -> UniquenessVerdict:
    if len(starts) < 2:
        raise ValueError("need at least two starting points")
    limits, failures = [], []
    for start in starts:
        tr = picard(space, smap, start, stop)
        if tr.status.converged:
            limits.append(tr.status.fixed_point)
        else:
            failures.append((start, tr.status))
    if failures:
        return UniquenessVerdict("inconclusive", limits, None, failures)
    gap = max(space.d(a, b) for i, a in enumerate(limits) for b in limits[i + 1:])
    return UniquenessVerdict("pass" if gap <= tol_unique else "fail", limits, gap)


# ---------------------------------------------------------------------------
# export


def write_trace_csv(
    trace: IterationTrace,
    out: TextIO | str,
    gamma: float | None = None,
    phi: Modulus | None = None,
) -> None:
    """Columns: n, point, step_dist, bound_m2 (Kannan rate bound), slack_m1 (p = 1 decrease slack)."""
    if isinstance(out, str):
        with open(out, "w", newline="") as fh:
            write_trace_csv(trace, fh, gamma, phi)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n", "point", "step_dist", "bound_m2", "slack_m1"])
    steps = trace.step_dist
    use_gamma = gamma is not None and 0 <= gamma < 0.5 and steps
    for n, point in enumerate(trace.iterates):
        step = repr(steps[n]) if n < len(steps) else ""
        bound = repr(kannan_rate_bound(gamma, steps[0], n)) if use_gamma and n < len(steps) else ""
        slack = ""
        if phi is not None and n + 1 < len(steps):
            slack = repr(steps[n] - float(phi(steps[n])) - steps[n + 1])
        writer.writerow([n, trace.space.label(point), step, bound, slack])


def trace_csv_text(trace: IterationTrace, gamma=None, phi=None) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf, gamma, phi)
    return buf.getvalue()
