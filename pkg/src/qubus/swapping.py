"""Hybrid qubit-qubus Bell states, the partial hybrid Bell measurement,
entanglement swapping over two links and per-link attempt statistics.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .hybrid import (
    HADAMARD,
    PAULI_Z,
    HybridState,
    apply_qubit_gate,
    coherent_overlap,
    controlled_rotation,
    measure_mode,
    measure_qubit,
    plus_state,
    qubit_qubus_state,
    tensor,
    trace_out_modes,
)
from .metrics import bell_fidelity
from .params import LinkParams
from .usd import (
    Classification,
    apply_receiver,
    classify_and_condition,
    homodyne_p_condition,
    measure_pattern,
    number_resolving_correction,
    p_window_povm,
    pattern_outcomes,
    pattern_probabilities,
)

HYBRID_BELL_KINDS = ("pair1+", "pair1-", "pair2+", "pair2-")
DISCRIMINATORS = ("usd_unrotated", "p_homodyne")
SCHEMES = ("even", "odd_ent", "total_usd", "homodyne")

_EVEN = (True, True, False)
_ODD = (False, False, True)


def _kind_terms(kind: str, beta: complex, theta: float):
    """(qubit, label) of the two components and the relative sign of a hybrid Bell state."""
    if kind not in HYBRID_BELL_KINDS:
        raise ValueError(f"unknown hybrid Bell state {kind!r}; choose from {HYBRID_BELL_KINDS}")
    rotated = beta * cmath.exp(1j * theta)
    sign = 1.0 if kind.endswith("+") else -1.0
    if kind.startswith("pair1"):
        return (0, beta), (1, rotated), sign
    return (0, rotated), (1, beta), sign


def hybrid_bell_state(kind: str, beta: complex, theta: float) -> HybridState:
    """(|0>|beta> +- |1>|beta e^{i theta}>)/sqrt(2) (pair 1) or
    (|0>|beta e^{i theta}> +- |1>|beta>)/sqrt(2) (pair 2), one qubit and one mode."""
    (q0, l0), (q1, l1), sign = _kind_terms(kind, beta, theta)
    amp = 1.0 / math.sqrt(2.0)
    return HybridState.pure(1, 1, [(amp, q0, (l0,)), (sign * amp, q1, (l1,))])


def _matrix_element(state: HybridState, u, v) -> complex:
    """<q_u, l_u| rho |q_v, l_v> for a one-qubit, one-mode state."""
    (qu, lu), (qv, lv) = u, v
    return sum(
        (br.coeff * coherent_overlap(lu, br.ket_labels[0]) * coherent_overlap(br.bra_labels[0], lv)
         for br in state.branches if br.ket == qu and br.bra == qv),
        0.0j,
    )


def hybrid_bell_fidelity(state: HybridState, kind: str, beta: complex, theta: float,
                         optimize_phase: bool = False) -> float:
    """Overlap of a qubit-mode state with a hybrid Bell state.

    With ``optimize_phase`` the relative phase of the target is chosen to
    maximise the overlap, i.e. a local qubit phase correction is allowed.
    """
    if (state.n_qubits, state.n_modes) != (1, 1):
        raise ValueError("hybrid Bell fidelity needs a one-qubit, one-mode state")
    state = state.normalized()
    u, v, sign = _kind_terms(kind, beta, theta)
    diag = _matrix_element(state, u, u).real + _matrix_element(state, v, v).real
    cross = _matrix_element(state, u, v)
    if optimize_phase:
        return float(0.5 * diag + abs(cross))
    return float(0.5 * diag + (sign * cross).real)


def best_hybrid_bell_fidelity(state: HybridState, beta: complex, theta: float) -> tuple[str, float]:
    """Largest phase-optimised overlap over the four hybrid Bell states (kind, fidelity)."""
    scores = {k: hybrid_bell_fidelity(state, k, beta, theta, optimize_phase=True) for k in HYBRID_BELL_KINDS[::2]}
    kind = max(scores, key=scores.get)
    return kind, scores[kind]


# --------------------------------------------------------------------------
# hybrid Bell measurement

@dataclass(frozen=True)
class SwapOutcome:
    """Sampled record of a hybrid Bell measurement plus its exact statistics.

    ``branches`` maps each successful identification (a hybrid Bell kind) to
    its probability and normalised post-measurement state.
    """

    success: bool
    identified_pair: str | None
    post_state: HybridState | None
    classical_bits: tuple
    success_probability: float
    branches: dict = field(default_factory=dict, compare=False)


def homodyne_halfwidth_limit(params: LinkParams) -> float:
    """Half the p-distance between the unrotated and rotated peaks."""
    return 0.5 * math.sqrt(2.0) * params.transmitted_alpha * abs(math.sin(params.theta))


def _discriminate(state: HybridState, mode: int, params: LinkParams, discriminator: str,
                  window_halfwidth: float | None):
    """Unnormalised state after a conclusive 'unrotated' verdict on ``mode`` (mode removed)."""
    if discriminator == "usd_unrotated":
        n = state.n_modes
        out = apply_receiver(state, mode, params)
        return measure_pattern(out, (mode, n, n + 1), _EVEN)
    if discriminator == "p_homodyne":
        limit = homodyne_halfwidth_limit(params)
        h = limit if window_halfwidth is None else window_halfwidth
        if not 0.0 <= h <= limit:
            raise ValueError(f"homodyne half-width must lie in [0, {limit:.6g}] (nearest-peak region)")
        if h == 0.0:
            return None
        return measure_mode(state, mode, p_window_povm(-h, h))
    raise ValueError(f"unknown discriminator {discriminator!r}; choose from {DISCRIMINATORS}")


def _odd_projection(state: HybridState, mode: int, params: LinkParams, feedforward_qubit: int):
    """Coherent projection on the rotated pair: USD odd pattern with number-resolved port 3.

    The photon-number feed-forward is modelled as a controlled rotation of
    port 3 conditioned on ``feedforward_qubit`` (see usd.number_resolving_correction).
    """
    n = state.n_modes
    out = apply_receiver(state, mode, params)
    port3 = n + 1
    # the +theta branch is tagged by feedforward_qubit = 1; rotate it onto the -theta phase
    out = controlled_rotation(out, feedforward_qubit, port3, -number_resolving_correction(params))
    return measure_pattern(out, (mode, n, port3), _ODD)


def hybrid_bell_measure(state: HybridState, qubit_index: int, mode_index: int, params: LinkParams,
                        discriminator: str = "usd_unrotated", *, window_halfwidth: float | None = None,
                        number_resolving: bool = False, feedforward_qubit: int | None = None,
                        rng: np.random.Generator | None = None, seed: int | None = None) -> SwapOutcome:
    """Partial hybrid Bell measurement on (qubit_index, mode_index).

    The qubit rotates the mode by -theta, gets a Hadamard and is measured in
    the computational basis; the mode is tested for the unrotated amplitude
    ``params.transmitted_alpha``. Success means the unrotated state was
    identified, which singles out pair 1 with sign given by the qubit
    result. With ``number_resolving`` (USD only, needs ``feedforward_qubit``)
    pair 2 is identified as well.
    """
    if not 0 <= qubit_index < state.n_qubits:
        raise IndexError(f"qubit {qubit_index} out of range for {state.n_qubits} qubits")
    if not 0 <= mode_index < state.n_modes:
        raise IndexError(f"mode {mode_index} out of range for {state.n_modes} modes")
    if number_resolving:
        if discriminator != "usd_unrotated":
            raise ValueError("number-resolved pair-two identification is modelled for the USD receiver only")
        if feedforward_qubit is None or feedforward_qubit == qubit_index:
            raise ValueError("number-resolved identification needs a distinct feed-forward qubit")
        if not 0 <= feedforward_qubit < state.n_qubits:
            raise IndexError(f"feed-forward qubit {feedforward_qubit} out of range")

    rotated = controlled_rotation(state, qubit_index, mode_index, -params.theta)
    rotated = apply_qubit_gate(rotated, qubit_index, HADAMARD)

    conditioned = {"pair1": _discriminate(rotated, mode_index, params, discriminator, window_halfwidth)}
    if number_resolving:
        conditioned["pair2"] = _odd_projection(rotated, mode_index, params, feedforward_qubit)

    branches = {}
    for pair, st in conditioned.items():
        if st is None:
            continue
        for m in (0, 1):
            post = measure_qubit(st, qubit_index, m)
            prob = post.trace().real
            if prob > 0:
                branches[f"{pair}{'+-'[m]}"] = (float(prob), post.scaled(1.0 / prob))

    p_success = sum(p for p, _ in branches.values())
    if rng is None:
        rng = np.random.default_rng(seed)
    u = rng.random()
    acc = 0.0
    for kind, (p, post) in branches.items():
        acc += p
        if u < acc:
            return SwapOutcome(True, kind, post, (kind.startswith("pair2"), int(kind.endswith("-"))),
                               p_success, branches)
    return SwapOutcome(False, None, None, (None, None), p_success, branches)


def entanglement_swap(left: HybridState, right: HybridState, params: LinkParams, *,
                      discriminator: str = "usd_unrotated", window_halfwidth: float | None = None,
                      number_resolving: bool = False, rng: np.random.Generator | None = None,
                      seed: int | None = None) -> SwapOutcome:
    """Swap two qubit-mode links (1, 2) and (3, 4) into a hybrid link (1, 4).

    The Bell measurement acts on qubit 3 and mode 2. A qubit result of 1
    is undone by a Z on qubit 1, so every successful branch targets the +
    member of its pair.
    """
    for name, st in (("left", left), ("right", right)):
        if (st.n_qubits, st.n_modes) != (1, 1):
            raise ValueError(f"{name} link must be one qubit and one mode")
    joint = tensor(left, right)          # qubits (1, 3), modes (2, 4)
    out = hybrid_bell_measure(joint, 1, 0, params, discriminator, window_halfwidth=window_halfwidth,
                              number_resolving=number_resolving, feedforward_qubit=0 if number_resolving else None,
                              rng=rng, seed=seed)
    corrected = {}
    for kind, (p, post) in out.branches.items():
        if kind.endswith("-"):
            post = apply_qubit_gate(post, 0, PAULI_Z)
        corrected[kind] = (p, post)
    post = corrected[out.identified_pair][1] if out.success else None
    return SwapOutcome(out.success, out.identified_pair, post, out.classical_bits, out.success_probability, corrected)


def swap_target(kind: str) -> str:
    """Hybrid Bell state a corrected swap branch should match."""
    return kind[:5] + "+"


def swap_report(params: LinkParams, *, discriminator: str = "usd_unrotated",
                window_halfwidth: float | None = None, number_resolving: bool = False,
                seed: int | None = None) -> dict:
    """Swap two identical links built from ``params``; exact per-branch numbers plus one sampled record."""
    link = qubit_qubus_state(params)
    out = entanglement_swap(link, link, params, discriminator=discriminator, window_halfwidth=window_halfwidth,
                            number_resolving=number_resolving, seed=seed)
    beta = params.transmitted_alpha
    rows = []
    for kind, (p, post) in out.branches.items():
        rows.append({
            "branch": kind,
            "probability": p,
            "fidelity": hybrid_bell_fidelity(post, swap_target(kind), beta, params.theta, optimize_phase=True),
        })
    return {
        "success_probability": out.success_probability,
        "input_fidelity": hybrid_bell_fidelity(link, "pair1+", beta, params.theta, optimize_phase=True),
        "branches": rows,
        "sampled_success": out.success,
        "sampled_branch": out.identified_pair,
    }


# --------------------------------------------------------------------------
# optional hybrid -> two-qubit conversion

def convert_to_two_qubit(state: HybridState, params: LinkParams) -> tuple[float, np.ndarray]:
    """Turn a hybrid link into a two-qubit state with a fresh qubit and the USD receiver.

    The fresh qubit in |+> rotates the mode by -theta; the even receiver
    pattern heralds the two-qubit state (probability at most 1/2). The
    mode amplitude is taken as ``params.transmitted_alpha``. Returns the
    probability and the normalised state (old qubit first).
    """
    if (state.n_qubits, state.n_modes) != (1, 1):
        raise ValueError("conversion needs a one-qubit, one-mode state")
    joint = tensor(state, plus_state(1, []))
    joint = controlled_rotation(joint, 1, 0, -params.theta)
    joint = apply_receiver(joint, 0, params)
    rho = trace_out_modes(measure_pattern(joint, (0, 1, 2), _EVEN)) / state.trace().real
    prob = float(np.trace(rho).real)
    if prob <= 0:
        raise ValueError("conversion has zero success probability for these parameters")
    return prob, rho / prob


def phase_optimized_fidelity(rho: np.ndarray) -> float:
    """Max over a local phase of the overlap with (|00> + e^{i phi}|11>)/sqrt(2)."""
    rho = np.asarray(rho)
    return float(0.5 * (rho[0, 0].real + rho[3, 3].real) + abs(rho[0, 3]))


# --------------------------------------------------------------------------
# elementary-link statistics

class LinkStatistics(NamedTuple):
    success_probability: float
    expected_attempts: float
    fidelity: float


def link_attempt_statistics(params: LinkParams, scheme: str = "even",
                            window_halfwidth: float | None = None) -> LinkStatistics:
    """(P, 1/P, F) of one elementary link for a heralding scheme.

    even: pattern CCN; odd_ent: pattern NNC with number-resolved port 3;
    total_usd: CCN plus every pattern with a port-3 click, F being the
    probability-weighted fidelity to the Bell state each pattern targets;
    homodyne: p-window around the unrotated peak (default half-width is
    half the peak separation).
    """
    if scheme == "even":
        out = classify_and_condition(_EVEN, params)
        p, f = pattern_probabilities(params).p_even, out.fidelity
    elif scheme == "odd_ent":
        out = classify_and_condition(_ODD, params, number_resolving=True)
        p, f = pattern_probabilities(params).p_odd_ent, out.fidelity
    elif scheme == "total_usd":
        p, weighted = 0.0, 0.0
        for o in pattern_outcomes(params):
            if o.pattern == _EVEN or (o.pattern[2] and o.probability > 0):
                p += o.probability
                if o.conditional_state is not None:
                    target = o.target or ("psi+" if o.classification in (
                        Classification.IDENTIFIES_PLUS_THETA, Classification.IDENTIFIES_MINUS_THETA) else "phi+")
                    weighted += o.probability * bell_fidelity(o.conditional_state, target)
        f = weighted / p if p > 0 else math.nan
    elif scheme == "homodyne":
        h = homodyne_halfwidth_limit(params) if window_halfwidth is None else window_halfwidth
        if not h > 0:
            raise ValueError("zero homodyne window: theta or alpha is zero")
        p, rho = homodyne_p_condition(params, h)
        f = bell_fidelity(rho, "phi+")
    else:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if not p > 0:
        raise ValueError(f"scheme {scheme!r} has zero success probability for these parameters")
    return LinkStatistics(float(p), 1.0 / p, float(f))


__all__ = [
    "HYBRID_BELL_KINDS", "DISCRIMINATORS", "SCHEMES", "hybrid_bell_state", "hybrid_bell_fidelity",
    "best_hybrid_bell_fidelity", "SwapOutcome", "homodyne_halfwidth_limit", "hybrid_bell_measure",
    "entanglement_swap", "swap_target", "swap_report", "convert_to_two_qubit", "phase_optimized_fidelity",
    "LinkStatistics", "link_attempt_statistics",
]
