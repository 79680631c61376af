"""Conditional two-qubit state preparation from measurements on the qubus.

Covers the quantum bounds for discriminating the unrotated coherent state
from the two rotated ones, the linear-optics three-port receiver with
displacements and on/off detectors, pattern statistics in closed form and
from the exact branch representation, a Monte-Carlo sampler of detector
clicks, and a p-quadrature homodyne comparator.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf, erfc

from .hybrid import (
    HybridState,
    OnOffDetector,
    add_vacuum_modes,
    beam_splitter,
    build_link_state,
    coherent_overlap,
    controlled_rotation,
    displace,
    displaced_label,
    measure_mode,
    trace_out_modes,
)
from .metrics import BELL_STATES
from .params import LAMBDA_MAX, LinkParams, one_minus_cos

IDEAL = OnOffDetector()


def _distinguishability(params: LinkParams) -> float:
    """eta alpha^2 (1 - cos theta)."""
    return params.eta * params.alpha**2 * one_minus_cos(params.theta)


# --------------------------------------------------------------------------
# quantum bounds

def usd_failure_bound_from_fidelity(fidelity: float, eta: float) -> float:
    """Minimal inconclusive probability at two-qubit fidelity F: (2F - 1)^(eta / (1 - eta))."""
    if not 0.5 <= fidelity <= 1.0:
        raise ValueError(f"fidelity must lie in [1/2, 1], got {fidelity}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1) for the fidelity form of the bound, got {eta}")
    base = 2.0 * fidelity - 1.0
    if base == 0.0:
        return 0.0
    return base ** (eta / (1.0 - eta))


def usd_optimal_failure(params: LinkParams) -> float:
    """exp(-eta alpha^2 (1 - cos theta))."""
    return math.exp(-_distinguishability(params))


# --------------------------------------------------------------------------
# receiver

class Classification(str, enum.Enum):
    IDENTIFIES_UNROTATED = "identifies_unrotated"
    IDENTIFIES_RHO2_PARITY_UNKNOWN = "identifies_rho2_parity_unknown"
    IDENTIFIES_PLUS_THETA = "identifies_plus_theta"
    IDENTIFIES_MINUS_THETA = "identifies_minus_theta"
    PARTIALLY_CONCLUSIVE = "partially_conclusive"
    INCONCLUSIVE_VACUUM = "inconclusive_vacuum"
    IMPOSSIBLE = "impossible"


# a pattern is (click1, click2, click3); index = 4 c1 + 2 c2 + c3
PATTERNS: tuple = tuple((bool(i & 4), bool(i & 2), bool(i & 1)) for i in range(8))

_CLASSIFICATION = {
    (True, True, False): Classification.IDENTIFIES_UNROTATED,
    (False, False, True): Classification.IDENTIFIES_RHO2_PARITY_UNKNOWN,
    (False, True, True): Classification.IDENTIFIES_PLUS_THETA,
    (True, False, True): Classification.IDENTIFIES_MINUS_THETA,
    (False, True, False): Classification.PARTIALLY_CONCLUSIVE,
    (True, False, False): Classification.PARTIALLY_CONCLUSIVE,
    (False, False, False): Classification.INCONCLUSIVE_VACUUM,
    (True, True, True): Classification.IMPOSSIBLE,
}


def pattern_index(pattern: Sequence[bool]) -> int:
    c1, c2, c3 = (bool(x) for x in pattern)
    return 4 * c1 + 2 * c2 + c3


def pattern_name(pattern: Sequence[bool]) -> str:
    """E.g. (True, True, False) -> 'CCN'."""
    return "".join("C" if c else "N" for c in pattern)


def parse_pattern(text: str) -> tuple:
    text = text.strip().upper()
    if len(text) != 3 or set(text) - {"C", "N"}:
        raise ValueError(f"pattern must be three of C/N, got {text!r}")
    return tuple(ch == "C" for ch in text)


def classify(pattern: Sequence[bool]) -> Classification:
    return _CLASSIFICATION[tuple(bool(x) for x in pattern)]


def nominal_inputs(params: LinkParams) -> tuple[complex, complex, complex]:
    """The three qubus states reaching the receiver: unrotated, +theta, -theta."""
    a = params.transmitted_alpha
    return complex(a), a * cmath.exp(1j * params.theta), a * cmath.exp(-1j * params.theta)


def receiver_displacements(params: LinkParams) -> tuple[complex, complex, complex]:
    lam = params.lambda_bs
    _, plus, minus = nominal_inputs(params)
    return -lam * plus, -lam * minus, complex(-params.third_port * params.transmitted_alpha)


def _check_lambda(params: LinkParams):
    if not 0.0 <= params.lambda_bs <= LAMBDA_MAX + 1e-12:
        raise ValueError(f"lambda_bs must lie in [0, 1/sqrt(2)], got {params.lambda_bs}")


def receiver_transform(input_label: complex, params: LinkParams) -> tuple[complex, complex, complex]:
    """Output labels of the three detectors for a coherent input |beta, 0, 0>."""
    _check_lambda(params)
    beta = complex(input_label)
    split = (params.lambda_bs * beta, params.lambda_bs * beta, params.third_port * beta)
    return tuple(displaced_label(s, g)[0] for s, g in zip(split, receiver_displacements(params)))


def apply_receiver(state: HybridState, mode: int, params: LinkParams) -> HybridState:
    """Send ``mode`` through the three-port (two vacuum ancillas appended) and displace.

    The three receiver outputs end up as modes ``mode``, n, n+1 with n the
    original mode count. The three-port is a splitter of transmission
    sqrt(2) lambda between the input and the third port, followed by a 50/50
    splitter between the input and the second port.
    """
    _check_lambda(params)
    n = state.n_modes
    out = add_vacuum_modes(state, 2)
    out = beam_splitter(out, mode, n + 1, math.sqrt(2.0) * params.lambda_bs)
    out = beam_splitter(out, mode, n, 1.0 / math.sqrt(2.0))
    for m, gamma in zip((mode, n, n + 1), receiver_displacements(params)):
        out = displace(out, m, gamma)
    return out


def link_receiver_state(params: LinkParams) -> HybridState:
    """Link state with the qubus run through the receiver (modes 0, 1, 2 = detectors 1, 2, 3)."""
    return apply_receiver(build_link_state(params), 0, params)


# --------------------------------------------------------------------------
# closed-form statistics

@dataclass(frozen=True)
class UsdBudget:
    p_even: float
    p_odd_usd: float
    p_odd_ent: float

    @property
    def p_total_usd(self) -> float:
        return self.p_even + self.p_odd_usd

    @property
    def p_total_ent(self) -> float:
        return self.p_even + self.p_odd_ent


def pattern_probabilities(params: LinkParams) -> UsdBudget:
    """Success probabilities of the even, odd and combined receiver schemes."""
    _check_lambda(params)
    lam2 = params.lambda_bs**2
    x = _distinguishability(params)
    p_even = 0.5 * math.expm1(-2.0 * lam2 * x) ** 2
    p_odd_usd = -0.5 * math.expm1(-2.0 * params.third_port_weight * x)
    vac12 = math.exp(-4.0 * lam2 * params.eta * params.alpha**2 * math.sin(params.theta) ** 2)
    return UsdBudget(p_even, p_odd_usd, p_odd_usd * vac12)


def click_probabilities(params: LinkParams, detector: OnOffDetector = IDEAL) -> np.ndarray:
    """3x3 array: row = input (unrotated, +theta, -theta), column = detector."""
    return np.array([
        [detector.click_probability(g) for g in receiver_transform(b, params)]
        for b in nominal_inputs(params)
    ])


PRIORS = np.array([0.5, 0.25, 0.25])


def pattern_distribution(params: LinkParams, detector: OnOffDetector = IDEAL) -> np.ndarray:
    """Probabilities of the eight patterns (indexed as in PATTERNS) from per-input click statistics."""
    pc = click_probabilities(params, detector)
    out = np.zeros(8)
    for idx, pat in enumerate(PATTERNS):
        for prior, row in zip(PRIORS, pc):
            p = prior
            for c, q in zip(pat, row):
                p *= q if c else 1.0 - q
            out[idx] += p
    return out


# --------------------------------------------------------------------------
# conditional states from the branch representation

@dataclass(frozen=True)
class PatternOutcome:
    pattern: tuple
    classification: Classification
    probability: float
    conditional_state: np.ndarray | None = None
    target: str | None = None

    @property
    def fidelity(self) -> float | None:
        if self.conditional_state is None or self.target is None:
            return None
        v = BELL_STATES[self.target]
        return float(np.real(v.conj() @ self.conditional_state @ v))


def _pattern_povms(pattern, detector: OnOffDetector):
    return [detector.click if c else detector.no_click for c in pattern]


def measure_pattern(state: HybridState, modes: Sequence[int], pattern, detector: OnOffDetector = IDEAL) -> HybridState:
    """Project detector ``modes`` (ports 1, 2, 3) on a click pattern and discard them."""
    out = state
    # highest index first so the remaining indices stay valid
    for m, povm in sorted(zip(modes, _pattern_povms(pattern, detector)), key=lambda t: -t[0]):
        out = measure_mode(out, m, povm)
    return out


def align_odd_phase(rho: np.ndarray) -> np.ndarray:
    """Local phase on qubit C making the |01>,|10> coherence real and non-negative."""
    c = rho[1, 2]
    if abs(c) < 1e-300:
        return rho
    u = np.kron(np.eye(2), np.diag([1.0, np.exp(-1j * np.angle(c))]))
    return u @ rho @ u.conj().T


def number_resolving_correction(params: LinkParams) -> float:
    """Rotation angle equivalent to number-resolved detection of port 3 with feed-forward.

    A photon count n on port 3 leaves the odd qubit pair with the relative
    phase (g+/g-)^n, g+- being the port-3 labels of the +-theta inputs;
    undoing it on qubit C for every n is the same map as rotating port 3 by
    arg g+ - arg g- conditioned on qubit C before the detector.
    """
    _, plus, minus = nominal_inputs(params)
    g_plus = receiver_transform(plus, params)[2]
    g_minus = receiver_transform(minus, params)[2]
    if g_plus == 0 or g_minus == 0:
        return 0.0
    return cmath.phase(g_plus) - cmath.phase(g_minus)


def classify_and_condition(pattern: Sequence[bool], params: LinkParams, *, number_resolving: bool = False,
                           detector: OnOffDetector = IDEAL,
                           receiver_state: HybridState | None = None) -> PatternOutcome:
    """Probability of a detection pattern and the two-qubit state it heralds.

    ``number_resolving`` models a photon-number-resolving third detector with
    phase feed-forward for the odd pattern (N, N, C); it requires an ideal
    detector.
    """
    pattern = tuple(bool(x) for x in pattern)
    cls = classify(pattern)
    state = receiver_state if receiver_state is not None else link_receiver_state(params)
    if number_resolving and cls is Classification.IDENTIFIES_RHO2_PARITY_UNKNOWN:
        if not detector.ideal:
            raise ValueError("number-resolved feed-forward is modelled for ideal detectors only")
        state = controlled_rotation(state, 1, 2, number_resolving_correction(params))
    rho = trace_out_modes(measure_pattern(state, (0, 1, 2), pattern, detector))
    prob = float(np.trace(rho).real)

    cond, target = None, None
    if cls is Classification.IDENTIFIES_UNROTATED:
        target = "phi+"
    elif cls is Classification.IDENTIFIES_RHO2_PARITY_UNKNOWN:
        target = "psi+"
    elif cls in (Classification.IDENTIFIES_PLUS_THETA, Classification.IDENTIFIES_MINUS_THETA):
        target = None
    else:
        return PatternOutcome(pattern, cls, prob)
    if prob > 0:
        cond = rho / prob
        cond = 0.5 * (cond + cond.conj().T)
        if target == "psi+":
            cond = align_odd_phase(cond)
    return PatternOutcome(pattern, cls, prob, cond, target)


def pattern_outcomes(params: LinkParams, *, number_resolving: bool = False,
                     detector: OnOffDetector = IDEAL) -> list[PatternOutcome]:
    """All eight outcomes, sharing one receiver state."""
    state = link_receiver_state(params)
    return [classify_and_condition(p, params, number_resolving=number_resolving, detector=detector,
                                   receiver_state=state) for p in PATTERNS]


# --------------------------------------------------------------------------
# Monte Carlo

def sample_patterns(params: LinkParams, trials: int, rng: np.random.Generator,
                    detector: OnOffDetector = IDEAL) -> np.ndarray:
    """Counts of the eight patterns over ``trials`` simulated receiver shots.

    Each shot draws the qubus state from the link priors (1/2, 1/4, 1/4) and
    fires every detector independently with its click probability.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pc = click_probabilities(params, detector)
    which = rng.choice(3, size=trials, p=PRIORS)
    clicks = rng.random((trials, 3)) < pc[which]
    idx = clicks[:, 0] * 4 + clicks[:, 1] * 2 + clicks[:, 2]
    return np.bincount(idx.astype(np.int64), minlength=8)


def z_scores(counts: np.ndarray, probs: np.ndarray) -> np.ndarray:
    n = counts.sum()
    z = np.zeros(len(counts))
    for i, (k, p) in enumerate(zip(counts, probs)):
        var = n * p * (1.0 - p)
        if var > 0:
            z[i] = (k - n * p) / math.sqrt(var)
        elif k != n * p:
            z[i] = math.inf
    return z


# --------------------------------------------------------------------------
# homodyne comparator

def _erf_diff(a: complex, b: complex) -> complex:
    """erf(a) - erf(b), using erfc in the tails."""
    if a.real > 0 and b.real > 0:
        return erfc(b) - erfc(a)
    if a.real < 0 and b.real < 0:
        return erfc(-a) - erfc(-b)
    return erf(a) - erf(b)


def p_window_povm(lo: float, hi: float):
    """Coherent-state matrix elements of the projector onto p in [lo, hi].

    Quadratures x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)); vacuum
    variance 1/2.
    """
    if not lo < hi:
        raise ValueError("empty homodyne window")

    def povm(bra: complex, ket: complex) -> complex:
        xk, pk = math.sqrt(2) * ket.real, math.sqrt(2) * ket.imag
        xb, pb = math.sqrt(2) * bra.real, math.sqrt(2) * bra.imag
        c = complex(0.5 * (pk + pb), -0.5 * (xk - xb))
        frac = 0.5 * _erf_diff(complex(hi) - c, complex(lo) - c)
        return coherent_overlap(bra, ket) * complex(frac)

    return povm


def homodyne_p_condition(params: LinkParams, window_halfwidth: float) -> tuple[float, np.ndarray]:
    """Accept p-quadrature results within +-halfwidth of the unrotated peak (p = 0).

    Returns the acceptance probability and the normalised two-qubit state,
    which keeps a residual odd-parity (bit-flip) component.
    """
    if not window_halfwidth > 0:
        raise ValueError("window half-width must be positive")
    state = build_link_state(params)
    peak = math.sqrt(2) * nominal_inputs(params)[0].imag
    measured = measure_mode(state, 0, p_window_povm(peak - window_halfwidth, peak + window_halfwidth))
    rho = trace_out_modes(measured)
    prob = float(np.trace(rho).real)
    if prob <= 0:
        raise ValueError("homodyne window has zero acceptance probability")
    cond = rho / prob
    return prob, 0.5 * (cond + cond.conj().T)


def homodyne_odd_weight_gaussian(params: LinkParams, window_halfwidth: float) -> float:
    """Bit-flip weight of the homodyne-conditioned state from Gaussian tails alone.

    The unrotated and rotated qubus states have p-marginals N(0, 1/2) and
    N(+-sqrt(2) sqrt(eta) alpha sin theta, 1/2) with priors 1/2, 1/4, 1/4.
    """
    from scipy.stats import norm

    sd = math.sqrt(0.5)
    w = window_halfwidth
    shift = math.sqrt(2) * params.transmitted_alpha * math.sin(params.theta)
    p_even = 0.5 * (norm.cdf(w, 0, sd) - norm.cdf(-w, 0, sd))
    p_rot = norm.cdf(w, shift, sd) - norm.cdf(-w, shift, sd)
    p_odd = 0.25 * 2 * p_rot
    return p_odd / (p_even + p_odd)


__all__ = [
    "Classification", "PATTERNS", "PatternOutcome", "UsdBudget", "apply_receiver", "classify",
    "classify_and_condition", "click_probabilities", "homodyne_p_condition", "link_receiver_state", "measure_pattern",
    "nominal_inputs", "number_resolving_correction", "p_window_povm", "parse_pattern", "pattern_distribution",
    "pattern_index", "pattern_name", "pattern_outcomes", "pattern_probabilities", "receiver_transform",
    "sample_patterns", "usd_failure_bound_from_fidelity", "usd_optimal_failure", "z_scores",
]
