"""Truncated photon-number-basis simulator used as an independent check.

States are numpy arrays with one axis per mode (plus any qubit axes the
caller keeps in front). Beam splitters are exponentiated block by block in
each fixed-total-photon subspace, displacements are exponentiated in an
enlarged space and cropped. Every operation that can push amplitude past
the cutoff checks the norm and raises :class:`TruncationError` instead of
silently losing it.

This module is a correctness instrument, not a fast path.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .hybrid import phase_gate, rotated_frame_hadamard
from .params import LinkParams
from .usd import (
    PATTERNS,
    PRIORS,
    align_odd_phase,
    nominal_inputs,
    number_resolving_correction,
    receiver_displacements,
)

LEAKAGE_TOL = 1e-8
PREP_LEAKAGE_TOL = 1e-12


class TruncationError(RuntimeError):
    """The photon-number cutoff is too small for the requested operation."""


def default_cutoff(beta: complex) -> int:
    n = abs(beta) ** 2
    return int(math.ceil(n + 10.0 * math.sqrt(n + 1.0) + 20.0))


def tight_cutoff(beta: complex, tol: float = 1e-14) -> int:
    """Smallest cutoff whose Poisson tail weight is below ``tol``."""
    n = abs(beta) ** 2
    cutoff = int(math.ceil(n))
    while poisson.sf(cutoff, n) >= tol:
        cutoff += 1
    return cutoff


def prepare_coherent(beta: complex, cutoff: int | None = None) -> np.ndarray:
    """Number-basis amplitudes e^{-|b|^2/2} b^n / sqrt(n!) for n <= cutoff."""
    beta = complex(beta)
    if cutoff is None:
        cutoff = default_cutoff(beta)
    n2 = abs(beta) ** 2
    if n2 > 0 and poisson.sf(cutoff, n2) > PREP_LEAKAGE_TOL:
        raise TruncationError(f"cutoff {cutoff} leaves more than {PREP_LEAKAGE_TOL} of |{beta}> outside")
    n = np.arange(cutoff + 1)
    if beta == 0:
        out = np.zeros(cutoff + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * n2 + n * math.log(abs(beta)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(beta))


def _check_norm(before: float, after: float, what: str):
    if before > 0 and abs(after - before) > LEAKAGE_TOL * before:
        raise TruncationError(f"{what}: norm changed from {before:.3e} to {after:.3e}; raise the cutoff")


def apply_phase_rotation(psi: np.ndarray, axis: int, phi: float) -> np.ndarray:
    """exp(i phi n) on one mode."""
    d = psi.shape[axis]
    shape = [1] * psi.ndim
    shape[axis] = d
    return psi * np.exp(1j * phi * np.arange(d)).reshape(shape)


@lru_cache(maxsize=256)
def _bs_block(total: int, t: float) -> np.ndarray:
    """exp(phi (a b^dag - a^dag b)) on span{|k, total-k>}, cos(phi) = t."""
    phi = math.acos(min(1.0, max(-1.0, t)))
    g = np.zeros((total + 1, total + 1))
    for k in range(total + 1):
        if k > 0:
            g[k - 1, k] += math.sqrt(k * (total - k + 1))
        if k < total:
            g[k + 1, k] -= math.sqrt((k + 1) * (total - k))
    return expm(phi * g)


def apply_beamsplitter(psi: np.ndarray, i: int, j: int, t: float) -> np.ndarray:
    """Beam splitter of amplitude transmission ``t`` between axes ``i`` and ``j``.

    Coherent inputs map as |b_i, b_j> -> |t b_i - r b_j, r b_i + t b_j>.
    """
    if i == j:
        raise ValueError("beam splitter needs two distinct axes")
    before = float(np.vdot(psi, psi).real)
    arr = np.moveaxis(psi, (i, j), (-2, -1))
    d = arr.shape[-1]
    if arr.shape[-2] != d:
        raise ValueError("beam splitter axes must share a cutoff")
    out = np.zeros_like(arr, dtype=complex)
    for total in range(2 * d - 1):
        lo, hi = max(0, total - d + 1), min(total, d - 1)
        ks = np.arange(lo, hi + 1)
        block = _bs_block(total, float(t))[np.ix_(ks, ks)]
        out[..., ks, total - ks] = arr[..., ks, total - ks] @ block.T
    out = np.moveaxis(out, (-2, -1), (i, j))
    _check_norm(before, float(np.vdot(out, out).real), "beam splitter")
    return out


@lru_cache(maxsize=256)
def displacement_matrix(gamma: complex, dim: int, rows: int | None = None) -> np.ndarray:
    """<m|D(gamma)|n> for m < rows, n < dim, from a matrix exponential in an enlarged space."""
    rows = dim if rows is None else rows
    big = max(rows, dim) + 60 + int(4 * abs(gamma) ** 2)
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    gen = gamma * a.T - np.conj(gamma) * a
    return expm(gen)[:rows, :dim]


def apply_displacement(psi: np.ndarray, axis: int, gamma: complex) -> np.ndarray:
    before = float(np.vdot(psi, psi).real)
    d = psi.shape[axis]
    mat = displacement_matrix(complex(gamma), d)
    out = np.moveaxis(np.tensordot(mat, psi, axes=([1], [axis])), 0, axis)
    _check_norm(before, float(np.vdot(out, out).real), "displacement")
    return out


def loss_kraus(eta: float, dim: int) -> list[np.ndarray]:
    """Kraus operators of the pure-loss channel on a truncated mode."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {eta}")
    ops = []
    n = np.arange(dim)
    for k in range(dim):
        m = np.zeros((dim, dim))
        src = n[k:]
        if eta == 1.0:
            if k == 0:
                m[src, src] = 1.0
            ops.append(m)
            continue
        logc = gammaln(src + 1) - gammaln(k + 1) - gammaln(src - k + 1)
        m[src - k, src] = np.exp(0.5 * logc + 0.5 * (src - k) * math.log(eta) + 0.5 * k * math.log1p(-eta))
        ops.append(m)
    return ops


def apply_loss(rho: np.ndarray, eta: float) -> np.ndarray:
    """Pure-loss channel on a single-mode density matrix."""
    return sum(k @ rho @ k.T for k in loss_kraus(eta, rho.shape[0]))


def measure_onoff(psi: np.ndarray, axes) -> dict:
    """Click/no-click distribution of a pure multimode state over the given axes."""
    axes = tuple(axes)
    prob = np.abs(psi) ** 2
    total = prob.sum()
    out = {}
    for bits in range(1 << len(axes)):
        pattern = tuple(bool(bits >> (len(axes) - 1 - k) & 1) for k in range(len(axes)))
        mask = prob
        for ax, c in zip(axes, pattern):
            sel = np.take(mask, [0], axis=ax) if not c else np.take(mask, range(1, psi.shape[ax]), axis=ax)
            mask = sel
        out[pattern] = float(mask.sum() / total)
    return out


def measure_number(psi: np.ndarray, axis: int) -> np.ndarray:
    prob = np.abs(np.moveaxis(psi, axis, 0)) ** 2
    dist = prob.reshape(prob.shape[0], -1).sum(axis=1)
    return dist / dist.sum()


def p_wavefunctions(dim: int, p: np.ndarray) -> np.ndarray:
    """<p|n> for n < dim (rows) on the grid ``p`` (columns); p = (a - a^dag)/(i sqrt 2)."""
    p = np.asarray(p, dtype=float)
    h = np.zeros((dim, p.size))
    h[0] = math.pi ** -0.25 * np.exp(-0.5 * p**2)
    if dim > 1:
        h[1] = math.sqrt(2.0) * p * h[0]
    for n in range(1, dim - 1):
        h[n + 1] = math.sqrt(2.0 / (n + 1)) * p * h[n] - math.sqrt(n / (n + 1)) * h[n - 1]
    return ((-1j) ** np.arange(dim))[:, None] * h


def p_window_povm_matrix(dim: int, lo: float, hi: float, nodes: int = 600) -> np.ndarray:
    """Number-basis matrix of the projector onto p in [lo, hi] by Gauss-Legendre quadrature."""
    reach = math.sqrt(2.0 * dim + 1.0) + 12.0
    lo, hi = max(lo, -reach), min(hi, reach)
    if not lo < hi:
        return np.zeros((dim, dim), dtype=complex)
    x, w = np.polynomial.legendre.leggauss(nodes)
    p = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * w
    psi = p_wavefunctions(dim, p)
    return (psi.conj() * w) @ psi.T


# --------------------------------------------------------------------------
# link pipeline in the number basis

def oracle_cutoff(params: LinkParams) -> int:
    return tight_cutoff(params.alpha)


def oracle_link_density(params: LinkParams, cutoff: int | None = None,
                        output_cutoff: int | None = None) -> np.ndarray:
    """Density matrix of (qubit A, qubit C, qubus), shape (2, 2, d, 2, 2, d).

    The qubus passes the loss channel as a beam splitter onto an explicit
    environment mode that is traced out at the end. With ``output_cutoff``
    the received qubus is cropped to that photon number; the weight
    dropped must stay below LEAKAGE_TOL.
    """
    cutoff = oracle_cutoff(params) if cutoff is None else cutoff
    d = cutoff + 1
    bus = prepare_coherent(params.alpha, cutoff)
    env = np.zeros(d, dtype=complex)
    env[0] = 1.0
    psi = 0.5 * np.ones((2, 2))[:, :, None, None] * np.multiply.outer(bus, env)[None, None]
    psi[1] = apply_phase_rotation(psi[1], 1, params.theta)
    psi = apply_beamsplitter(psi, 2, 3, math.sqrt(params.eta))
    psi[:, 1] = apply_phase_rotation(psi[:, 1], 1, -params.theta)
    psi = np.einsum("ab,bcde->acde", rotated_frame_hadamard(params.xi), psi)
    psi = np.einsum("ab,cbde->cade", phase_gate(params.eta * params.xi), psi)
    if output_cutoff is not None and output_cutoff < cutoff:
        dropped = np.sum(np.abs(psi[:, :, output_cutoff + 1:]) ** 2)
        if dropped > LEAKAGE_TOL:
            raise TruncationError(f"received qubus weight {dropped:.2e} above photon number {output_cutoff}")
        psi = psi[:, :, : output_cutoff + 1]
    return np.einsum("acne,bdme->acnbdm", psi, psi.conj())


def _received_cutoff(params: LinkParams, cutoff: int) -> int:
    return min(cutoff, tight_cutoff(params.transmitted_alpha))


def receiver_output_batch(params: LinkParams, dim: int) -> np.ndarray:
    """U|n, 0, 0> for every n < dim; shape (n, k1, k2, k3), before displacements."""
    psi = np.zeros((dim, dim, dim, dim), dtype=complex)
    psi[np.arange(dim), np.arange(dim), 0, 0] = 1.0
    psi = apply_beamsplitter(psi, 1, 3, math.sqrt(2.0) * params.lambda_bs)
    return apply_beamsplitter(psi, 1, 2, 1.0 / math.sqrt(2.0))


def receiver_povms(params: LinkParams, dim: int, frame_shift: complex = 0.0) -> np.ndarray:
    """POVM matrices on the receiver input for all eight click patterns, shape (8, dim, dim).

    With ``frame_shift`` s the matrices act on inputs written as |beta - s>:
    the passive splitters carry D(s) to D(lambda s), D(lambda s),
    D(sqrt(1 - 2 lambda^2) s) on the ports, which merge with the receiver
    displacements. Phases from merging displacements cancel in each POVM
    element, so pattern probabilities are unchanged.
    """
    batch = receiver_output_batch(params, dim)
    fractions = (params.lambda_bs, params.lambda_bs, params.third_port)
    vac_rows = [displacement_matrix(complex(g + c * frame_shift), dim)[0]
                for g, c in zip(receiver_displacements(params), fractions)]

    def vacuum_projected(subset):
        k = batch
        # contract the vacuum row of each displaced port in ``subset``; others are traced
        for port in sorted(subset, reverse=True):
            k = np.tensordot(k, vac_rows[port], axes=([1 + port], [0]))
        flat = k.reshape(dim, -1)
        # <n'|M|n> = sum_r conj(K[n', r]) K[n, r]
        return flat.conj() @ flat.T

    cache = {}
    out = np.zeros((8, dim, dim), dtype=complex)
    for idx, pattern in enumerate(PATTERNS):
        dark = [p for p in range(3) if not pattern[p]]
        lit = [p for p in range(3) if pattern[p]]
        for bits in range(1 << len(lit)):
            extra = [lit[b] for b in range(len(lit)) if bits >> b & 1]
            key = tuple(sorted(dark + extra))
            if key not in cache:
                cache[key] = vacuum_projected(key)
            out[idx] += (-1) ** len(extra) * cache[key]
    return out


def oracle_pattern_distribution(params: LinkParams, cutoff: int | None = None,
                                shifted_frame: bool = False) -> np.ndarray:
    """Pattern probabilities from number-basis coherent inputs with the link priors.

    ``shifted_frame`` writes every input relative to the unrotated amplitude,
    so only |sqrt(eta) alpha (e^{+-i theta} - 1)| has to fit under the
    cutoff; this reaches amplitudes far beyond a direct number-basis run.
    """
    inputs = nominal_inputs(params)
    shift = inputs[0] if shifted_frame else 0.0
    if cutoff is None:
        cutoff = max(tight_cutoff(b - shift) for b in inputs)
    povms = receiver_povms(params, cutoff + 1, shift)
    out = np.zeros(8)
    for prior, beta in zip(PRIORS, inputs):
        v = prepare_coherent(beta - shift, cutoff)
        out += prior * np.real(np.einsum("m,pmn,n->p", v.conj(), povms, v))
    return out


def _conditional(rho_qb: np.ndarray, povm: np.ndarray) -> np.ndarray:
    sigma = np.einsum("acnbdm,mn->acbd", rho_qb, povm).reshape(4, 4)
    return sigma


def oracle_conditional_state(params: LinkParams, pattern, cutoff: int | None = None,
                             number_resolving: bool = False) -> tuple[float, np.ndarray]:
    """Probability and normalised two-qubit state heralded by ``pattern``."""
    cutoff = oracle_cutoff(params) if cutoff is None else cutoff
    received = _received_cutoff(params, cutoff)
    d = received + 1
    rho = oracle_link_density(params, cutoff, received)
    pattern = tuple(bool(x) for x in pattern)
    if number_resolving and pattern == (False, False, True):
        sigma = _number_resolved_odd(params, rho, d)
    else:
        sigma = _conditional(rho, receiver_povms(params, d)[PATTERNS.index(pattern)])
    prob = float(np.trace(sigma).real)
    cond = sigma / prob
    if pattern == (False, False, True):
        cond = align_odd_phase(cond)
    return prob, cond


def _number_resolved_odd(params: LinkParams, rho: np.ndarray, d: int) -> np.ndarray:
    """Ports 1, 2 dark, photon count n >= 1 on port 3, phase exp(i delta n) fed forward to qubit C."""
    batch = receiver_output_batch(params, d)
    g1, g2, g3 = receiver_displacements(params)
    rows = d + 30
    k = np.tensordot(batch, displacement_matrix(complex(g2), d)[0], axes=([2], [0]))
    k = np.tensordot(k, displacement_matrix(complex(g1), d)[0], axes=([1], [0]))
    d3 = displacement_matrix(complex(g3), d, rows)
    amps = k @ d3.T                                # (n_in, n3)
    delta = number_resolving_correction(params)
    sigma = np.zeros((4, 4), dtype=complex)
    for n3 in range(1, rows):
        povm = np.outer(amps[:, n3].conj(), amps[:, n3])
        s = _conditional(rho, povm)
        v = np.kron(np.eye(2), np.diag([1.0, np.exp(1j * delta * n3)]))
        sigma += v @ s @ v.conj().T
    return sigma


def oracle_homodyne_condition(params: LinkParams, window_halfwidth: float,
                              cutoff: int | None = None) -> tuple[float, np.ndarray]:
    cutoff = oracle_cutoff(params) if cutoff is None else cutoff
    received = _received_cutoff(params, cutoff)
    d = received + 1
    rho = oracle_link_density(params, cutoff, received)
    peak = math.sqrt(2) * nominal_inputs(params)[0].imag
    povm = p_window_povm_matrix(d, peak - window_halfwidth, peak + window_halfwidth)
    sigma = _conditional(rho, povm)
    prob = float(np.trace(sigma).real)
    return prob, sigma / prob
