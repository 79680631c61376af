import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qubus.hybrid import HybridState, mode_span_density, qubit_qubus_state
from qubus.metrics import alpha_for_fidelity, concurrence
from qubus.params import LinkParams, transmission
from qubus.swapping import (
    DISCRIMINATORS,
    best_hybrid_bell_fidelity,
    convert_to_two_qubit,
    entanglement_swap,
    homodyne_halfwidth_limit,
    hybrid_bell_fidelity,
    hybrid_bell_measure,
    hybrid_bell_state,
    link_attempt_statistics,
    phase_optimized_fidelity,
    swap_report,
    swap_target,
)
from qubus.usd import pattern_probabilities


def usd_swap_probability(p: LinkParams) -> float:
    return 0.5 * (1 - math.exp(-2 * p.lambda_bs**2 * p.transmitted_alpha**2 * (1 - math.cos(p.theta)))) ** 2


def test_hybrid_bell_states_are_normalised_and_distinct():
    b, th = 2.0, 0.5
    for kind in ("pair1+", "pair1-", "pair2+", "pair2-"):
        s = hybrid_bell_state(kind, b, th)
        assert s.trace().real == pytest.approx(1.0, abs=1e-14)
        assert hybrid_bell_fidelity(s, kind, b, th) == pytest.approx(1.0, abs=1e-14)
    assert hybrid_bell_fidelity(hybrid_bell_state("pair1+", b, th), "pair1-", b, th) == pytest.approx(0.0, abs=1e-14)
    assert best_hybrid_bell_fidelity(hybrid_bell_state("pair2-", b, th), b, th)[0] == "pair2+"
    with pytest.raises(ValueError):
        hybrid_bell_state("pair3+", b, th)


def test_measure_identifies_pair_one_plus():
    # a pure pair-1 input is found twice as often as in a swap, where pair 1 carries weight 1/2
    p = LinkParams(alpha=3.0, theta=0.6)
    out = hybrid_bell_measure(hybrid_bell_state("pair1+", 3.0, 0.6), 0, 0, p, seed=4)
    assert set(out.branches) <= {"pair1+", "pair1-"}
    assert out.branches["pair1+"][0] == pytest.approx(2 * usd_swap_probability(p), abs=1e-12)
    assert "pair1-" not in out.branches or out.branches["pair1-"][0] < 1e-14


def test_measure_index_errors():
    p = LinkParams(alpha=1.0, theta=0.5)
    s = hybrid_bell_state("pair1+", 1.0, 0.5)
    with pytest.raises(IndexError):
        hybrid_bell_measure(s, 1, 0, p)
    with pytest.raises(IndexError):
        hybrid_bell_measure(s, 0, 1, p)
    with pytest.raises(ValueError):
        hybrid_bell_measure(s, 0, 0, p, number_resolving=True)
    with pytest.raises(ValueError):
        hybrid_bell_measure(s, 0, 0, p, discriminator="other")


@pytest.mark.parametrize("alpha,theta,lam", [(3.0, 0.6, 0.7), (2.0, 0.3, 0.4), (1.0, 1.0, 0.7), (6.0, 0.2, 0.01)])
def test_lossless_swap_is_ideal(alpha, theta, lam):
    p = LinkParams(alpha=alpha, theta=theta, lambda_bs=lam)
    link = qubit_qubus_state(p)
    out = entanglement_swap(link, link, p, seed=0)
    assert out.success_probability == pytest.approx(usd_swap_probability(p), abs=1e-12)
    assert out.success_probability <= 0.5 + 1e-12
    for kind, (_, post) in out.branches.items():
        assert (post.n_qubits, post.n_modes) == (1, 1)
        assert hybrid_bell_fidelity(post, swap_target(kind), p.transmitted_alpha, theta) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=40)
@given(st.floats(0.1, 8.0), st.floats(0.01, math.pi), st.floats(0.05, 1.0), st.floats(0.01, 0.7))
def test_swap_ceiling(alpha, theta, eta, lam):
    p = LinkParams.from_eta(alpha, theta, eta, lambda_bs=lam)
    link = qubit_qubus_state(p)
    for disc in DISCRIMINATORS:
        out = entanglement_swap(link, link, p, discriminator=disc, seed=0)
        assert -1e-15 <= out.success_probability <= 0.5 + 1e-12


def test_zero_rotation_never_succeeds():
    p = LinkParams(alpha=3.0, theta=0.0)
    link = qubit_qubus_state(p)
    out = entanglement_swap(link, link, p, seed=0)
    assert out.success_probability == 0 and not out.success and out.post_state is None


def test_unentangled_link_gives_unentangled_output():
    p = LinkParams(alpha=3.0, theta=0.6)
    right = qubit_qubus_state(LinkParams(alpha=0.0, theta=0.6))
    out = entanglement_swap(qubit_qubus_state(p), right, p, seed=0)
    assert out.branches
    for _, post in out.branches.values():
        assert concurrence(mode_span_density(post, 0)) < 1e-10


def test_lossy_swap_degrades_fidelity():
    prev = math.inf
    for eta in (1.0, 0.9, 0.7, 0.5):
        p = LinkParams.from_eta(2.0, 0.5, eta)
        rep = swap_report(p, seed=0)
        for br in rep["branches"]:
            assert br["fidelity"] <= rep["input_fidelity"] + 1e-12
        c = concurrence(mode_span_density(entanglement_swap(qubit_qubus_state(p), qubit_qubus_state(p), p,
                                                            seed=0).branches["pair1+"][1], 0))
        assert c <= prev + 1e-12
        prev = c


def test_swap_is_seeded():
    p = LinkParams.from_eta(2.0, 0.5, 0.8)
    link = qubit_qubus_state(p)
    a = entanglement_swap(link, link, p, seed=11)
    b = entanglement_swap(link, link, p, seed=11)
    assert (a.success, a.identified_pair, a.classical_bits) == (b.success, b.identified_pair, b.classical_bits)
    rng = np.random.default_rng(5)
    n = 300
    hits = sum(entanglement_swap(link, link, p, rng=rng).success for _ in range(n))
    ps = a.success_probability
    assert abs(hits / n - ps) < 4 * math.sqrt(ps * (1 - ps) / n)


def test_number_resolving_adds_pair_two():
    p = LinkParams(alpha=3.0, theta=0.6)
    link = qubit_qubus_state(p)
    out = entanglement_swap(link, link, p, number_resolving=True, seed=0)
    assert {"pair2+", "pair2-"} & set(out.branches)
    for kind, (_, post) in out.branches.items():
        f = hybrid_bell_fidelity(post, swap_target(kind), p.transmitted_alpha, p.theta, optimize_phase=True)
        assert f == pytest.approx(1.0, abs=1e-10)
    assert out.success_probability > entanglement_swap(link, link, p, seed=0).success_probability


def test_homodyne_window_limit():
    p = LinkParams(alpha=3.0, theta=0.6)
    link = qubit_qubus_state(p)
    limit = homodyne_halfwidth_limit(p)
    with pytest.raises(ValueError):
        entanglement_swap(link, link, p, discriminator="p_homodyne", window_halfwidth=1.01 * limit)
    narrow = entanglement_swap(link, link, p, discriminator="p_homodyne", window_halfwidth=0.5 * limit, seed=0)
    wide = entanglement_swap(link, link, p, discriminator="p_homodyne", seed=0)
    assert narrow.success_probability < wide.success_probability <= 0.5


def test_conversion_to_two_qubits():
    b, th = 2.5, 0.8
    p = LinkParams(alpha=b, theta=th)
    prob, rho = convert_to_two_qubit(hybrid_bell_state("pair1+", b, th), p)
    assert prob == pytest.approx(pattern_probabilities(p).p_even, abs=1e-12)
    assert phase_optimized_fidelity(rho) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        convert_to_two_qubit(HybridState.pure(2, 1, [(1.0, 0, (b,))]), p)


@pytest.mark.parametrize("dist,want", [(50.0, 0.007358641468882892), (100.0, 0.0001030605493893887)])
def test_link_statistics_even_fixture(dist, want):
    alpha = alpha_for_fidelity(0.7, transmission(dist), 0.01)
    stats = link_attempt_statistics(LinkParams(alpha=alpha, theta=0.01, distance_km=dist))
    assert stats.success_probability == pytest.approx(want, rel=1e-10)
    assert stats.expected_attempts == pytest.approx(1 / want, rel=1e-10)
    assert stats.fidelity == pytest.approx(0.7, abs=1e-10)


def test_link_statistics_schemes():
    p = LinkParams(alpha=80.0, theta=0.01, distance_km=17.0, lambda_bs=0.4)
    even = link_attempt_statistics(p, "even")
    odd = link_attempt_statistics(p, "odd_ent")
    total = link_attempt_statistics(p, "total_usd")
    hom = link_attempt_statistics(p, "homodyne")
    assert total.success_probability >= even.success_probability + odd.success_probability - 1e-15
    for s in (even, odd, total, hom):
        assert 0 < s.success_probability <= 1 and 0 <= s.fidelity <= 1
    lossless = link_attempt_statistics(LinkParams(alpha=2000.0, theta=0.01, lambda_bs=0.7), "even")
    assert lossless.success_probability == pytest.approx(0.5, abs=1e-9)
    assert lossless.fidelity == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        link_attempt_statistics(LinkParams(alpha=0.0, theta=0.01), "even")
    with pytest.raises(ValueError):
        link_attempt_statistics(p, "unknown")
