import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvfix.constants import EPS_CHECK
from bvfix.contraction import (
    ContractionReport,
    Estimate,
    InvalidModulusError,
    Modulus,
    PairSource,
    analyze_map,
    check_hypotheses,
    check_weak_contractive,
    estimate_banach_c,
    estimate_kannan_gamma,
    validate_modulus,
)
from bvfix.oracle import exact_constants
from bvfix.space import MapModel, MetricSpaceModel, SpaceSignature

from conftest import finite_spaces

LINE = MetricSpaceModel.from_function("abs(x - y)", -10, 10, sampler_n=401, sampler="grid")
UNIT = MetricSpaceModel.from_function("abs(x - y)", 0, 1, sampler_n=1001, sampler="grid")
HALF_LINE = MetricSpaceModel.from_function("abs(x - y)", 0, 10, sampler_n=1001, sampler="grid")


def grid(lo, hi, n):
    return PairSource.grid(np.linspace(lo, hi, n))


# -- moduli -----------------------------------------------------------------


def test_linear_modulus_valid():
    rep = validate_modulus(Modulus.linear(0.5))
    assert rep.valid and rep.continuity == "sampled-only"


def test_constant_modulus_fails_zero_at_zero():
    rep = validate_modulus(Modulus.expression("0.1"))
    assert not rep.valid and not rep.zero_ok and rep.witness == 0.0


def test_rational_modulus_valid_on_uniform_grid():
    rep = validate_modulus(Modulus.expression("t^2/(1+t)"), np.linspace(0, 10, 101))
    assert rep.valid and rep.monotone_ok and rep.positive_ok


def test_non_monotone_modulus_flagged():
    rep = validate_modulus(Modulus.expression("t*exp(-t)"), np.linspace(0, 10, 101))
    assert not rep.monotone_ok and rep.witness > 1.0


def test_jump_modulus_flagged_near_jump():
    rep = validate_modulus(Modulus.expression("if(t < 0.5, t, t + 1)"), np.linspace(0, 1, 33))
    assert not rep.continuity_ok
    assert rep.jump_suspects and abs(rep.jump_suspects[0] - 0.5) < 1e-6


def test_evaluation_failure_reported():
    rep = validate_modulus(Modulus.expression("log(t)"))
    assert not rep.valid and "evaluation failed" in rep.error


def test_grid_preconditions():
    with pytest.raises(ValueError):
        validate_modulus(Modulus.linear(1), np.linspace(0, 1, 10))
    with pytest.raises(ValueError):
        validate_modulus(Modulus.linear(1), np.linspace(0.1, 1, 40))


def test_table_and_power_moduli():
    tab = Modulus.table([0, 1, 2], [0, 0.5, 0.75])
    assert tab(0.5) == 0.25 and tab(3.0) == 1.0
    assert validate_modulus(tab).valid
    assert Modulus.power(2, 0.5)(4.0) == 4.0
    with pytest.raises(InvalidModulusError):
        Modulus.table([0.5, 1], [0, 1])


# -- Banach -----------------------------------------------------------------


def test_half_map_ratio_is_half():
    est = estimate_banach_c(LINE, MapModel.from_expr("x/2"))
    assert est.value == pytest.approx(0.5, abs=1e-15)


def test_identity_ratio_is_one():
    assert estimate_banach_c(LINE, MapModel.from_expr("x")).value == 1.0


def test_rational_map_ratio_below_one_and_rising_near_zero():
    smap = MapModel.from_expr("x/(1+x)")
    values = [estimate_banach_c(HALF_LINE, smap, grid(0, 10, n)).value for n in (11, 101, 1001, 10001)]
    assert all(v < 1 for v in values)
    assert values == sorted(values) and values[-1] > 0.99
    # closed form on the coarsest grid: the pair (0, 1) gives 1/(1*2)
    assert values[0] == pytest.approx(0.5)


def test_zero_distance_with_separated_images_is_unbounded():
    D = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0.0]])
    D[0, 1] = D[1, 0] = 0.0
    space = MetricSpaceModel.from_matrix(D)
    est = estimate_banach_c(space, MapModel.from_table([0, 2, 1]))
    assert est.unbounded and est.witness == (0, 1) and f"{est}" == "unbounded"


# -- Kannan -----------------------------------------------------------------


def test_classic_discontinuous_map_gamma_below_half():
    smap = MapModel.from_expr("if(x < 0.5, x/4, x/5)")
    est = estimate_kannan_gamma(UNIT, smap)
    assert 0 < est.value < 0.5


def test_constant_map_gamma_zero():
    est = estimate_kannan_gamma(LINE, MapModel.from_expr("3 + 0*x"))
    assert est.value == 0.0
    assert estimate_banach_c(LINE, MapModel.from_expr("3 + 0*x")).value == 0.0


def test_identity_on_two_points_gamma_unbounded():
    space = MetricSpaceModel.from_matrix([[0, 1], [1, 0]])
    est = estimate_kannan_gamma(space, MapModel.from_table([0, 1]))
    assert est.unbounded and est.report_value() == "unbounded"


# -- weak contraction -------------------------------------------------------


def test_rational_map_is_weakly_contractive():
    res = check_weak_contractive(HALF_LINE, MapModel.from_expr("x/(1+x)"), Modulus.expression("t^2/(1+t)"))
    assert res.weak_ok
    # analytically the slack is >= 0; allow only rounding
    assert res.min_slack >= -1e-12


def test_identity_not_weakly_contractive():
    ok, slack, wit = check_weak_contractive(LINE, MapModel.from_expr("x"), Modulus.linear(0.5))
    assert not ok and slack < 0 and wit[0] != wit[1]


def test_linear_equality_case():
    res = check_weak_contractive(LINE, MapModel.from_expr("0.3*x"), Modulus.linear(0.7))
    assert res.weak_ok and abs(res.min_slack) <= 1e-12


def test_invalid_modulus_rejected():
    with pytest.raises(InvalidModulusError):
        check_weak_contractive(LINE, MapModel.from_expr("x/2"), Modulus.expression("0.1"))


def test_analyze_map_collects_everything():
    rep = analyze_map(LINE, MapModel.from_expr("x/2"), Modulus.linear(0.5))
    assert rep.banach_c.value == pytest.approx(0.5)
    assert rep.weak_ok and rep.phi_valid and rep.mode == "grid"
    assert rep.pairs_checked == 401 * 400 // 2
    d = rep.to_dict()
    assert d["phi"] == "0.5*t" and d["kannan_gamma"] == rep.kannan_gamma.value


# -- hypotheses -------------------------------------------------------------


def _report(gamma, weak_ok=None, phi_valid=None):
    return ContractionReport(Estimate(0.5), Estimate(gamma), 0, "exhaustive", weak_ok=weak_ok, phi_valid=phi_valid)


def test_kannan_hypotheses_hold_when_product_at_most_one():
    h = check_hypotheses(SpaceSignature(v=1, s=2, complete=True), _report(0.4))
    assert h.satisfied and dict(h.details) == {"γ < 1/2": True, "sγ ≤ 1": True, "space complete (declared)": True}


def test_kannan_hypotheses_fail_on_large_product():
    h = check_hypotheses(SpaceSignature(v=1, s=3, complete=True), _report(0.4))
    assert not h.satisfied and h.failed() == ["sγ ≤ 1"]


def test_kannan_hypotheses_unbounded_gamma():
    h = check_hypotheses(SpaceSignature(v=1, s=1, complete=True), _report(math.inf))
    assert h.failed() == ["γ < 1/2", "sγ ≤ 1"]


def test_weak_hypotheses_conjunction():
    sig = SpaceSignature(v=2, s=1, complete=True)
    assert check_hypotheses(sig, _report(0.9, True, True), theorem="A").satisfied
    h = check_hypotheses(SpaceSignature(v=2, s=1, complete=False), _report(0.9, True, True), theorem="A")
    assert h.failed() == ["space complete (declared)"]
    with pytest.raises(ValueError):
        check_hypotheses(sig, _report(0.1), theorem="C")


def test_kannan_with_unit_s_reduces_to_gamma_below_half():
    for g in (0.0, 0.2, 0.49):
        h = check_hypotheses(SpaceSignature(v=1, s=1, complete=True), _report(g))
        assert h.satisfied


# -- properties -------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(finite_spaces(), st.sampled_from([0.0, 0.25, 0.5, 0.9]), st.data())
def test_linear_reduction_equivalence(space, c, data):
    n = len(space)
    smap = MapModel.from_table(data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n)))
    c_hat = estimate_banach_c(space, smap).value
    weak = check_weak_contractive(space, smap, Modulus.linear(1 - c))
    assert weak.weak_ok == (c_hat <= c + EPS_CHECK)


@settings(max_examples=60, deadline=None)
@given(finite_spaces(), st.data())
def test_relabeling_invariance(space, data):
    n = len(space)
    table = data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    perm = data.draw(st.permutations(range(n)))
    inv = np.argsort(perm)
    new_table = [int(inv[table[perm[i]]]) for i in range(n)]
    a = analyze_map(space, MapModel.from_table(table))
    b = analyze_map(space.permuted(perm), MapModel.from_table(new_table))
    assert a.banach_c.value == b.banach_c.value
    assert a.kannan_gamma.value == b.kannan_gamma.value


@settings(max_examples=60, deadline=None)
@given(finite_spaces(), st.data())
def test_exhaustive_matches_oracle(space, data):
    n = len(space)
    smap = MapModel.from_table(data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n)))
    c, g = exact_constants(space, smap)
    assert estimate_banach_c(space, smap).value == c.value
    assert estimate_kannan_gamma(space, smap).value == g.value


@settings(max_examples=60, deadline=None)
@given(finite_spaces(min_n=4), st.data())
def test_estimates_monotone_in_pair_source(space, data):
    n = len(space)
    smap = MapModel.from_table(data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n)))
    small = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=2, max_size=n - 1)))
    sub = PairSource(np.array(small), "sampled")
    full = PairSource.exhaustive(space)
    assert estimate_banach_c(space, smap, sub).value <= estimate_banach_c(space, smap, full).value
    assert estimate_kannan_gamma(space, smap, sub).value <= estimate_kannan_gamma(space, smap, full).value


def test_sampled_pairs_reproducible():
    smap = MapModel.from_expr("if(x < 0.5, x/4, x/5)")
    space = MetricSpaceModel.from_function("abs(x - y)", 0, 1, sampler_n=200)
    a = analyze_map(space, smap, pairs=PairSource.sampled(space, 200, seed=5))
    b = analyze_map(space, smap, pairs=PairSource.sampled(space, 200, seed=5))
    assert a.to_dict() == b.to_dict() and a.mode == "sampled" and a.seed == 5
