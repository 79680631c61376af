"""Table builders behind the command-line front end.

Each builder returns ``(columns, rows)`` with rows as tuples in grid order,
so output is deterministic for a given configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hybrid import mode_span_density, qubit_qubus_state
from .metrics import (
    alpha_for_fidelity,
    bell_fidelity,
    concurrence,
    entanglement_of_formation,
    link_quantities,
    qubit_qubus_closed_form,
)
from .params import DEFAULT_LOSS_DB_PER_KM, LinkParams, transmission
from .swapping import link_attempt_statistics, swap_report
from .usd import (
    PATTERNS,
    classify,
    classify_and_condition,
    pattern_distribution,
    pattern_name,
    pattern_probabilities,
    sample_patterns,
    usd_failure_bound_from_fidelity,
    usd_optimal_failure,
    z_scores,
)

FIG6_SCHEMES = (("usd_bound", None), ("even", 0.7), ("odd", 0.01), ("usd", 0.4))
Z_LIMIT = 4.0


class NumericAssertion(ArithmeticError):
    """A computed table cell is non-finite or outside its mathematical range."""


def check_probability(value: float, what: str, tol: float = 1e-12) -> float:
    if not math.isfinite(value) or value < -tol or value > 1.0 + tol:
        raise NumericAssertion(f"{what} = {value!r} is not a probability")
    return value


def check_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NumericAssertion(f"{what} = {value!r} is not finite")
    return value


def fig2_table(alphas, distances, theta: float = 0.01, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM):
    rows = []
    for dist in distances:
        for a in alphas:
            p = LinkParams(alpha=float(a), theta=theta, distance_km=float(dist), loss_db_per_km=loss_db_per_km)
            eof = entanglement_of_formation(qubit_qubus_closed_form(p))
            rows.append((float(a), float(dist), check_probability(eof, "eof")))
    return ("alpha", "distance_km", "eof"), rows


def fig4_table(fidelities, distances, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM):
    rows = []
    for dist in distances:
        eta = transmission(dist, loss_db_per_km)
        for f in fidelities:
            val = usd_failure_bound_from_fidelity(float(f), eta)
            rows.append((float(f), float(dist), check_probability(val, "optimal_failure")))
    return ("F", "distance_km", "optimal_failure"), rows


def fig6_failures(fidelity: float, distance_km: float, theta: float = 0.01,
                  loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> dict:
    """Failure probabilities of the bound and the three receiver schemes at one (F, distance)."""
    eta = transmission(distance_km, loss_db_per_km)
    alpha = alpha_for_fidelity(fidelity, eta, theta)
    out = {"usd_bound": usd_failure_bound_from_fidelity(fidelity, eta)}
    for scheme, lam in FIG6_SCHEMES[1:]:
        p = LinkParams(alpha=alpha, theta=theta, distance_km=distance_km, loss_db_per_km=loss_db_per_km,
                       lambda_bs=lam)
        b = pattern_probabilities(p)
        success = {"even": b.p_even, "odd": b.p_odd_ent, "usd": b.p_total_usd}[scheme]
        out[scheme] = 1.0 - success
    return out


def fig6_table(fidelities, distances, theta: float = 0.01, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM):
    rows = []
    for dist in distances:
        for f in fidelities:
            fails = fig6_failures(float(f), float(dist), theta, loss_db_per_km)
            for scheme, _ in FIG6_SCHEMES:
                rows.append((float(f), float(dist), scheme, check_probability(fails[scheme], f"{scheme} failure")))
    return ("F", "distance_km", "scheme", "failure_probability"), rows


@dataclass(frozen=True)
class MonteCarloReport:
    columns: tuple
    rows: list
    max_abs_z: float
    trials: int


def montecarlo_table(params: LinkParams, trials: int, seed: int) -> MonteCarloReport:
    if trials < 1:
        raise ValueError("trial count must be at least 1")
    rng = np.random.default_rng(seed)
    counts = sample_patterns(params, trials, rng)
    probs = pattern_distribution(params)
    z = z_scores(counts, probs)
    rows = []
    for pat, k, p, zi in zip(PATTERNS, counts, probs, z):
        rows.append((pattern_name(pat), classify(pat).value, int(k), float(k) / trials,
                     check_probability(float(p), "pattern probability"), float(zi)))
    finite = [abs(v) for v in z if math.isfinite(v)]
    max_z = math.inf if len(finite) < len(z) else max(finite)
    return MonteCarloReport(("pattern", "classification", "count", "frequency", "probability", "z"),
                            rows, max_z, trials)


def link_table(params: LinkParams, scheme: str = "even", window_halfwidth: float | None = None):
    lq = link_quantities(params)
    b = pattern_probabilities(params)
    even = classify_and_condition((True, True, False), params)
    stats = link_attempt_statistics(params, scheme, window_halfwidth)
    cells = {
        "alpha": params.alpha,
        "theta": params.theta,
        "distance_km": params.distance_km,
        "lambda": params.lambda_bs,
        "eta": check_probability(params.eta, "eta"),
        "mu_B": lq.mu_B,
        "mu_E": lq.mu_E,
        "fidelity_F": check_probability(lq.fidelity_F, "F"),
        "xi": check_finite(lq.xi, "xi"),
        "eof_qubit_qubus": check_probability(entanglement_of_formation(qubit_qubus_closed_form(params)), "eof"),
        "p_even": check_probability(b.p_even, "p_even"),
        "p_odd_usd": check_probability(b.p_odd_usd, "p_odd_usd"),
        "p_odd_ent": check_probability(b.p_odd_ent, "p_odd_ent"),
        "p_total_usd": check_probability(b.p_total_usd, "p_total_usd"),
        "usd_optimal_failure": check_probability(usd_optimal_failure(params), "usd_optimal_failure"),
        "even_state_fidelity": check_probability(bell_fidelity(even.conditional_state), "fidelity")
        if even.conditional_state is not None else math.nan,
        "even_state_concurrence": concurrence(even.conditional_state)
        if even.conditional_state is not None else math.nan,
        "scheme": scheme,
        "success_probability": check_probability(stats.success_probability, "success probability"),
        "expected_attempts": check_finite(stats.expected_attempts, "expected attempts"),
        "scheme_fidelity": check_probability(stats.fidelity, "scheme fidelity"),
    }
    return tuple(cells), [tuple(cells.values())]


def swap_table(params: LinkParams, discriminator: str = "usd_unrotated", window_halfwidth: float | None = None,
               number_resolving: bool = False, seed: int | None = None):
    rep = swap_report(params, discriminator=discriminator, window_halfwidth=window_halfwidth,
                      number_resolving=number_resolving, seed=seed)
    check_probability(rep["success_probability"], "swap success probability")
    rows = []
    for br in rep["branches"]:
        rows.append((br["branch"], check_probability(br["probability"], "branch probability"),
                     check_probability(br["fidelity"], "branch fidelity"), rep["input_fidelity"],
                     rep["success_probability"], rep["sampled_branch"] or "failure"))
    return ("branch", "probability", "fidelity", "input_fidelity", "success_probability", "sampled"), rows


def qubit_qubus_eof(params: LinkParams) -> float:
    """EoF of the qubit-qubus state from the branch representation (cross-check of the closed form)."""
    return entanglement_of_formation(mode_span_density(qubit_qubus_state(params), 0))
