import csv
import io

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bvfix.catalog import make_kannan_classic, make_swap, make_weak_contractive_classic
from bvfix.contraction import Modulus, estimate_banach_c
from bvfix.oracle import exact_constants
from bvfix.solver import (
    InsufficientTailError,
    StoppingCriteria,
    check_decrease,
    check_uniqueness,
    kannan_gap_bound,
    kannan_rate_bound,
    picard,
    trace_csv_text,
    verify_kannan_bounds,
    verify_residual,
    verify_weak_decrease,
)
from bvfix.space import DomainEscapeError, MapModel, MetricSpaceModel, SpaceSignature, minimal_s

from conftest import finite_spaces

LINE = MetricSpaceModel.from_function("abs(x - y)", -10, 10)
KANNAN = make_kannan_classic()
WEAK = make_weak_contractive_classic()


def kannan_gamma():
    return exact_constants(KANNAN.space, KANNAN.map, KANNAN.grid)[1].value


# -- picard -----------------------------------------------------------------


def test_halving_map_converges_geometrically():
    tr = picard(LINE, MapModel.from_expr("x/2"), 1.0, StoppingCriteria(tol_step=1e-8))
    assert tr.status.converged and len(tr.step_dist) <= 30
    assert abs(tr.status.fixed_point) < 1e-8
    assert len(tr.step_dist) == len(tr.iterates) - 1
    assert tr.step_dist[-1] < 1e-8
    for a, b in zip(tr.step_dist, tr.step_dist[1:]):
        assert b == a / 2


def test_kannan_map_converges_to_zero():
    tr = picard(KANNAN.space, KANNAN.map, 1.0)
    assert tr.status.converged and abs(tr.status.fixed_point) < 1e-10
    assert str(tr.status).startswith("Converged(")


def test_swap_cycles():
    e = make_swap()
    tr = picard(e.space, e.map, 0)
    assert tr.status.kind == "cycle" and tr.status.cycle == (0, 2)
    assert str(tr.status) == "CycleDetected(0, 2)"


def test_fixed_start_converges_immediately():
    tr = picard(LINE, MapModel.from_expr("x/2"), 0.0)
    assert tr.status.converged and tr.status.fixed_point == 0.0 and tr.step_dist == [0.0]


def test_max_iter():
    tr = picard(LINE, MapModel.from_expr("x/2"), 1.0, StoppingCriteria(max_iter=3))
    assert tr.status.kind == "max_iter" and str(tr.status) == "MaxIter" and len(tr.iterates) == 4


def test_domain_escape_reports_iterate():
    space = MetricSpaceModel.from_function("abs(x - y)", 0, 1)
    with pytest.raises(DomainEscapeError) as err:
        picard(space, MapModel.from_expr("x + 0.25"), 0.5)
    assert (err.value.index, err.value.value) == (3, 1.25)


def test_start_outside_domain():
    space = MetricSpaceModel.from_function("abs(x - y)", 0, 1)
    with pytest.raises(DomainEscapeError):
        picard(space, MapModel.from_expr("x/2"), 2.0)


def test_stopping_criteria_validation():
    with pytest.raises(ValueError):
        StoppingCriteria(tol_step=0)
    with pytest.raises(ValueError):
        StoppingCriteria(max_iter=0)


def test_gap_sequences():
    tr = picard(LINE, MapModel.from_expr("x/2"), 1.0, StoppingCriteria(max_iter=5))
    assert tr.gap(1) == tr.step_dist
    assert tr.gap(2) == [abs(tr.iterates[n] - tr.iterates[n + 2]) for n in range(4)]
    with pytest.raises(ValueError):
        tr.gap(0)


# -- a priori bounds --------------------------------------------------------


def test_rate_bound_examples():
    assert kannan_rate_bound(1 / 3, 1.0, 2) == pytest.approx(0.25, abs=1e-15)
    assert kannan_rate_bound(0.0, 5.0, 1) == 0.0
    assert kannan_rate_bound(0.3, 2.5, 0) == 2.5


def test_gap_bound_examples():
    assert kannan_gap_bound(1 / 3, 1.0, 2, 1) == pytest.approx(0.25, abs=1e-15)
    assert kannan_gap_bound(0.0, 3.0, 4, 2) == 0.0
    assert kannan_gap_bound(1 / 3, 0.0, 2, 3) == 0.0


@pytest.mark.parametrize("gamma", [0.5, 0.7, -0.1])
def test_bounds_reject_gamma_out_of_range(gamma):
    with pytest.raises(ValueError):
        kannan_rate_bound(gamma, 1.0, 1)
    with pytest.raises(ValueError):
        kannan_gap_bound(gamma, 1.0, 1, 1)


def test_kannan_catalog_bounds_pass():
    tr = picard(KANNAN.space, KANNAN.map, 1.0)
    rep = verify_kannan_bounds(tr, kannan_gamma())
    assert rep.ok and rep.to_dict()["violations"] == []
    assert {c.p for c in rep.checks if c.kind == "gap"} == {1, 2, 3}


def test_non_decaying_steps_fail_from_first_step():
    e = make_swap()
    tr = picard(e.space, e.map, 0)
    rep = verify_kannan_bounds(tr, 0.4)
    assert not rep.ok
    assert min(c.n for c in rep.violations() if c.kind == "rate") == 1


def test_single_step_trace_vacuous():
    tr = picard(LINE, MapModel.from_expr("x"), 3.0)
    assert verify_kannan_bounds(tr, 0.4).ok


# -- weak decrease ----------------------------------------------------------


def test_decrease_halving_sequence():
    checks, mono = check_decrease([1.0, 0.5, 0.25], Modulus.linear(0.5))
    assert mono and [c.slack for c in checks] == [0.0, 0.0] and all(c.ok for c in checks)


def test_constant_sequence_fails_decrease():
    checks, mono = check_decrease([0.3] * 4, Modulus.expression("t^2/(1+t)"))
    assert mono and not any(c.ok for c in checks)


def test_weak_catalog_trace_decreases():
    tr = picard(WEAK.space, WEAK.map, 10.0, WEAK.stop)
    rep = verify_weak_decrease(tr, WEAK.modulus, [1, 2, 3])
    assert rep.decrease_ok and rep.monotone_ok
    assert rep.min_slack >= -1e-12
    assert rep.notes[0] == "p window [1, 2, 3]"


def test_weak_decrease_needs_tail():
    tr = picard(LINE, MapModel.from_expr("x/2"), 0.0)
    with pytest.raises(InsufficientTailError):
        verify_weak_decrease(tr, Modulus.linear(0.5), [3])


# -- residual ---------------------------------------------------------------


def test_residual_rectangular_signature_passes():
    tr = picard(KANNAN.space, KANNAN.map, 1.0)
    sig = SpaceSignature(v=2, s=1.0, complete=True)
    verdict = verify_residual(KANNAN.space, sig, tr, gamma=kannan_gamma())
    assert verdict.ok and verdict.residual < 1e-8 and verdict.n == len(tr.iterates) - 3


def test_residual_weak_form_passes():
    tr = picard(WEAK.space, WEAK.map, 10.0, WEAK.stop)
    sig = SpaceSignature(v=2, s=1.0, complete=True)
    verdict = verify_residual(WEAK.space, sig, tr, phi=WEAK.modulus, tol_fixed=10 * WEAK.stop.tol_step)
    assert verdict.ok


def test_residual_degenerate_product():
    tr = picard(KANNAN.space, KANNAN.map, 1.0)
    verdict = verify_residual(KANNAN.space, SpaceSignature(v=1, s=4.0, complete=True), tr, gamma=0.25)
    assert verdict.status == "degenerate" and verdict.bound is None
    assert verdict.residual == pytest.approx(0.0, abs=1e-10)


def test_residual_exact_fixed_point():
    tr = picard(LINE, MapModel.from_expr("x/2"), 1.0)
    verdict = verify_residual(LINE, SpaceSignature(v=1, s=1.0), tr, 0.0, gamma=0.2)
    assert verdict.ok and verdict.residual == 0.0


def test_residual_short_trace():
    tr = picard(LINE, MapModel.from_expr("x/2"), 0.0)
    with pytest.raises(InsufficientTailError):
        verify_residual(LINE, SpaceSignature(v=3, s=1.0), tr, gamma=0.2)
    with pytest.raises(ValueError):
        verify_residual(LINE, SpaceSignature(v=1, s=1.0), tr)


# -- uniqueness -------------------------------------------------------------


def test_uniqueness_linear():
    v = check_uniqueness(LINE, MapModel.from_expr("x/2"), [-1.0, 1.0, 10.0])
    assert v.status == "pass" and all(abs(x) < 1e-9 for x in v.limits)


def test_uniqueness_identity_fails():
    v = check_uniqueness(LINE, MapModel.from_expr("x"), [0.2, 0.7])
    assert v.status == "fail" and v.max_gap == pytest.approx(0.5)


def test_uniqueness_weak_catalog_seeded_starts():
    v = check_uniqueness(WEAK.space, WEAK.map, WEAK.start_points(10, seed=3), WEAK.stop)
    assert v.status == "pass" and len(v.limits) == 10


def test_uniqueness_inconclusive_on_cycle():
    e = make_swap()
    v = check_uniqueness(e.space, e.map, [0, 1])
    assert v.status == "inconclusive" and len(v.failures) == 2


# -- export -----------------------------------------------------------------


def test_csv_columns():
    tr = picard(KANNAN.space, KANNAN.map, 1.0)
    rows = list(csv.DictReader(io.StringIO(trace_csv_text(tr, gamma=kannan_gamma()))))
    assert list(rows[0]) == ["n", "point", "step_dist", "bound_m2", "slack_m1"]
    assert len(rows) == len(tr.iterates)
    assert all(float(r["step_dist"]) <= float(r["bound_m2"]) + 1e-12 for r in rows[:-1])
    assert rows[-1]["step_dist"] == ""


# -- properties -------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10), st.sampled_from(["x/2", "if(x < 0.5, x/4, x/5)", "x/(1+abs(x))/2"]))
def test_picard_deterministic(u0, src):
    a = picard(LINE, MapModel.from_expr(src), u0)
    b = picard(LINE, MapModel.from_expr(src), u0)
    assert a.iterates == b.iterates and a.step_dist == b.step_dist and str(a.status) == str(b.status)


@st.composite
def biased_maps(draw, n):
    """Table maps that send most points to a fixed anchor."""
    anchor = draw(st.integers(0, n - 1))
    table = [draw(st.one_of(st.just(anchor), st.integers(0, n - 1))) for _ in range(n)]
    table[anchor] = anchor
    return table


@settings(max_examples=60, deadline=None)
@given(finite_spaces(min_n=4, max_n=7), st.data())
def test_kannan_hypotheses_imply_convergence_and_bounds(space, data):
    n = len(space)
    smap = MapModel.from_table(data.draw(biased_maps(n)))
    g = exact_constants(space, smap)[1].value
    s = minimal_s(space, 1).s
    assume(g < 0.5 and s * g <= 1)
    for u0 in range(n):
        tr = picard(space, smap, u0)
        assert tr.status.converged
        assert verify_kannan_bounds(tr, g).ok


@settings(max_examples=60, deadline=None)
@given(finite_spaces(min_n=4, max_n=7), st.data())
def test_weak_contraction_steps_strictly_decrease(space, data):
    n = len(space)
    smap = MapModel.from_table(data.draw(biased_maps(n)))
    c = estimate_banach_c(space, smap).value
    assume(c < 1)
    for u0 in range(n):
        steps = picard(space, smap, u0).step_dist
        positive = [x for x in steps if x > 0]
        assert all(b < a for a, b in zip(positive, positive[1:]))
