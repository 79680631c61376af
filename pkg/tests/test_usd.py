import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qubus.hybrid import OnOffDetector, build_link_state, trace_out_modes
from qubus.metrics import BELL_STATES, concurrence, link_quantities, odd_weight
from qubus.params import LAMBDA_MAX, LinkParams, transmission
from qubus.usd import (
    PATTERNS,
    Classification,
    classify,
    classify_and_condition,
    homodyne_odd_weight_gaussian,
    homodyne_p_condition,
    link_receiver_state,
    nominal_inputs,
    parse_pattern,
    pattern_distribution,
    pattern_index,
    pattern_name,
    pattern_outcomes,
    pattern_probabilities,
    receiver_transform,
    sample_patterns,
    usd_failure_bound_from_fidelity,
    usd_optimal_failure,
    z_scores,
)

CCN, NNC, NCC, CNC, NNN = (True, True, False), (False, False, True), (False, True, True), (True, False, True), (
    False, False, False)

# [DERIVED] 40-digit evaluation of (2F - 1)^(eta / (1 - eta)) at F = 0.75, eta = 10^(-0.018 * 17)
BOUND_17KM_F075 = 0.5078594596129249


def test_bound_linear_at_half():
    for f in (0.55, 0.75, 0.95, 1.0):
        assert abs(usd_failure_bound_from_fidelity(f, 0.5) - (2 * f - 1)) <= 1e-12


def test_bound_endpoints_and_17km():
    assert usd_failure_bound_from_fidelity(0.5, 0.3) == 0.0
    assert usd_failure_bound_from_fidelity(1.0, 0.3) == 1.0
    assert usd_failure_bound_from_fidelity(0.75, transmission(17)) == pytest.approx(BOUND_17KM_F075, rel=1e-12)
    with pytest.raises(ValueError):
        usd_failure_bound_from_fidelity(0.75, 1.0)
    with pytest.raises(ValueError):
        usd_failure_bound_from_fidelity(0.4, 0.5)


@given(st.floats(0.1, 300), st.floats(1e-3, 0.3), st.floats(0.02, 0.99))
def test_bound_chain_consistency(alpha, theta, eta):
    p = LinkParams.from_eta(alpha, theta, eta)
    f = link_quantities(p).fidelity_F
    # F carries the bound through 2F - 1; below ~1e-2 rounding in F alone exceeds 1e-12
    assume(2 * f - 1 > 1e-2)
    assert usd_failure_bound_from_fidelity(f, eta) == pytest.approx(usd_optimal_failure(p), abs=1e-12)


def test_optimal_failure_degenerate():
    assert usd_optimal_failure(LinkParams(alpha=0.0, theta=0.3)) == 1.0
    assert usd_optimal_failure(LinkParams(alpha=5.0, theta=0.0)) == 1.0


def test_receiver_transform_examples():
    p = LinkParams.from_eta(2.0, 0.3, 0.8, lambda_bs=0.5)
    a = p.transmitted_alpha
    unrot, plus, minus = nominal_inputs(p)
    out = receiver_transform(unrot, p)
    assert out[0] == pytest.approx(0.5 * a * (1 - cmath.exp(1j * 0.3)), abs=1e-15)
    assert out[1] == pytest.approx(0.5 * a * (1 - cmath.exp(-1j * 0.3)), abs=1e-15)
    assert out[2] == 0
    assert receiver_transform(plus, p)[0] == 0
    assert receiver_transform(minus, p)[1] == 0
    flat = LinkParams.from_eta(2.0, 0.0, 0.8, lambda_bs=0.5)
    for b in nominal_inputs(flat):
        assert receiver_transform(b, flat) == (0, 0, 0)


def test_pattern_probability_examples():
    assert pattern_probabilities(LinkParams(alpha=5.0, theta=0.0)).p_total_usd == 0.0
    p = LinkParams.from_eta(100.0, 0.01, 0.5, lambda_bs=0.7)
    # [DERIVED] 40-digit evaluation of 1/2 (1 - exp(-2 lambda^2 eta alpha^2 (1 - cos theta)))^2
    assert pattern_probabilities(p).p_even == pytest.approx(0.023608311609542246, rel=1e-12)
    edge = LinkParams.from_eta(3.0, 0.5, 0.9, lambda_bs=LAMBDA_MAX)
    assert pattern_probabilities(edge).p_odd_usd == 0.0


@given(st.floats(0.1, 200), st.sampled_from([1e-3, 1e-2, 0.5]), st.floats(0.016, 1.0),
       st.sampled_from([0.0, 0.01, 0.4, 0.7, LAMBDA_MAX]))
def test_budget_invariants(alpha, theta, eta, lam):
    b = pattern_probabilities(LinkParams.from_eta(alpha, theta, eta, lambda_bs=lam))
    assert b.p_odd_ent <= b.p_odd_usd
    assert b.p_even <= 0.5
    assert b.p_total_usd == b.p_even + b.p_odd_usd


@given(st.floats(0.1, 200), st.sampled_from([1e-3, 1e-2]), st.floats(0.016, 1.0), st.sampled_from([0.01, 0.4, 0.7]))
def test_distribution_matches_budget(alpha, theta, eta, lam):
    p = LinkParams.from_eta(alpha, theta, eta, lambda_bs=lam)
    d = pattern_distribution(p)
    b = pattern_probabilities(p)
    assert abs(d.sum() - 1) <= 1e-12
    assert d[pattern_index((True, True, True))] == 0.0
    assert d[pattern_index(CCN)] == pytest.approx(b.p_even, rel=1e-9, abs=1e-15)
    assert d[pattern_index(NNC)] == pytest.approx(b.p_odd_ent, rel=1e-9, abs=1e-15)
    port3 = sum(d[pattern_index(x)] for x in PATTERNS if x[2])
    assert port3 == pytest.approx(b.p_odd_usd, rel=1e-9, abs=1e-15)


def test_branch_route_matches_distribution():
    p = LinkParams.from_eta(100.0, 0.01, 0.5, lambda_bs=0.4)
    outs = pattern_outcomes(p)
    d = pattern_distribution(p)
    for o in outs:
        assert o.probability == pytest.approx(d[pattern_index(o.pattern)], abs=1e-14)
    assert sum(o.probability for o in outs) == pytest.approx(1.0, abs=1e-12)


def test_classification_table():
    table = {
        "CCN": Classification.IDENTIFIES_UNROTATED,
        "NNC": Classification.IDENTIFIES_RHO2_PARITY_UNKNOWN,
        "NCC": Classification.IDENTIFIES_PLUS_THETA,
        "CNC": Classification.IDENTIFIES_MINUS_THETA,
        "NCN": Classification.PARTIALLY_CONCLUSIVE,
        "CNN": Classification.PARTIALLY_CONCLUSIVE,
        "NNN": Classification.INCONCLUSIVE_VACUUM,
        "CCC": Classification.IMPOSSIBLE,
    }
    assert len(PATTERNS) == 8
    for name, cls in table.items():
        pat = parse_pattern(name)
        assert classify(pat) is cls
        assert pattern_name(pat) == name


def test_even_pattern_state():
    p = LinkParams(alpha=120.0, theta=0.01, distance_km=10.0, lambda_bs=0.7)
    o = classify_and_condition(CCN, p)
    f = link_quantities(p).fidelity_F
    assert o.classification is Classification.IDENTIFIES_UNROTATED
    assert o.fidelity == pytest.approx(f, abs=1e-12)
    want = f * np.outer(BELL_STATES["phi+"], BELL_STATES["phi+"]) + (1 - f) * np.outer(
        BELL_STATES["phi-"], BELL_STATES["phi-"])
    assert np.abs(o.conditional_state - want).max() < 1e-12
    assert odd_weight(o.conditional_state) == pytest.approx(0.0, abs=1e-14)


def test_vacuum_and_impossible_patterns():
    p = LinkParams(alpha=50.0, theta=0.01, distance_km=5.0)
    vac = classify_and_condition(NNN, p)
    assert vac.classification is Classification.INCONCLUSIVE_VACUUM and vac.conditional_state is None
    ccc = classify_and_condition((True, True, True), p)
    assert ccc.probability == 0.0


def test_rotated_patterns_are_separable():
    p = LinkParams.from_eta(3.0, 0.4, 0.6, lambda_bs=0.4)
    for pat in (NCC, CNC):
        o = classify_and_condition(pat, p)
        assert concurrence(o.conditional_state) == pytest.approx(0.0, abs=1e-12)


def test_odd_pattern_states():
    p = LinkParams.from_eta(3.0, 0.4, 0.6, lambda_bs=0.4)
    f = link_quantities(p).fidelity_F
    onoff = classify_and_condition(NNC, p)
    resolved = classify_and_condition(NNC, p, number_resolving=True)
    for o in (onoff, resolved):
        rho = o.conditional_state
        assert rho[0, 0].real + rho[3, 3].real == pytest.approx(0.0, abs=1e-14)
    assert resolved.fidelity == pytest.approx(f, abs=1e-12)
    assert onoff.fidelity < resolved.fidelity
    with pytest.raises(ValueError):
        classify_and_condition(NNC, p, number_resolving=True, detector=OnOffDetector(0.9))


def test_imperfect_detector_distribution_complete():
    p = LinkParams.from_eta(3.0, 0.4, 0.6, lambda_bs=0.4)
    det = OnOffDetector(efficiency=0.8, dark_count=1e-3)
    d = pattern_distribution(p, det)
    assert d.sum() == pytest.approx(1.0, abs=1e-12)
    assert d[pattern_index((True, True, True))] > 0
    branch = [classify_and_condition(x, p, detector=det).probability for x in PATTERNS]
    assert np.allclose(branch, d, atol=1e-13)


def test_lambda_degeneracy():
    base = dict(alpha=3.0, theta=0.4, eta=0.6)
    assert pattern_probabilities(LinkParams.from_eta(lambda_bs=1e-6, **base)).p_even < 1e-20
    assert pattern_probabilities(LinkParams.from_eta(lambda_bs=LAMBDA_MAX, **base)).p_odd_usd == 0.0


def test_homodyne_wide_window_is_trivial():
    p = LinkParams.from_eta(3.0, 0.4, 0.6)
    prob, rho = homodyne_p_condition(p, 1e6)
    assert prob == pytest.approx(1.0, abs=1e-12)
    assert np.abs(rho - trace_out_modes(build_link_state(p))).max() < 1e-12


def test_homodyne_large_separation_small_bitflip():
    p = LinkParams(alpha=500.0, theta=0.01, distance_km=0.0)
    prob, rho = homodyne_p_condition(p, 1.0)
    assert odd_weight(rho) < 1e-4
    assert 0 < prob <= 1


@settings(max_examples=25)
@given(st.floats(0.5, 200), st.floats(0.005, 0.5), st.floats(0.1, 1.0), st.floats(0.05, 3.0))
def test_homodyne_odd_weight_matches_gaussian_tails(alpha, theta, eta, w):
    p = LinkParams.from_eta(alpha, theta, eta)
    prob, rho = homodyne_p_condition(p, w)
    assert odd_weight(rho) == pytest.approx(homodyne_odd_weight_gaussian(p, w), abs=1e-10)


def test_usd_vs_homodyne_bitflip_at_matched_fidelity():
    p = LinkParams(alpha=90.0, theta=0.01, distance_km=20.0, lambda_bs=0.7)
    usd = classify_and_condition(CCN, p).conditional_state
    _, hom = homodyne_p_condition(p, 0.5 * math.sqrt(2) * p.transmitted_alpha * math.sin(p.theta))
    assert odd_weight(usd) == pytest.approx(0.0, abs=1e-14)
    assert odd_weight(hom) > 0


def test_monte_carlo_seeded_and_consistent():
    p = LinkParams(alpha=100.0, theta=0.01, distance_km=17.0, lambda_bs=0.4)
    a = sample_patterns(p, 20000, np.random.default_rng(5))
    b = sample_patterns(p, 20000, np.random.default_rng(5))
    assert np.array_equal(a, b)
    assert a.sum() == 20000 and a[pattern_index((True, True, True))] == 0
    assert np.abs(z_scores(a, pattern_distribution(p))).max() <= 4.5
    one = sample_patterns(p, 1, np.random.default_rng(0))
    assert one.sum() == 1


def test_link_receiver_state_trace():
    p = LinkParams.from_eta(2.0, 0.3, 0.7, lambda_bs=0.4)
    assert link_receiver_state(p).trace().real == pytest.approx(1.0, abs=1e-12)
    assert len(list(itertools.product(*[[0, 1]] * 3))) == len(PATTERNS)
