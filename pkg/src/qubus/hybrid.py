"""Exact algebra of qubits coupled to optical modes in coherent states.

A :class:`HybridState` stores an operator on ``n_qubits`` qubits and
``n_modes`` optical modes as a finite sum of dyads

    sum_k  c_k |q_k><q'_k| (x) |beta_k,1 ... ><beta'_k,1 ...|

where every optical factor is a coherent state. Controlled phase rotations,
passive linear optics, displacements, loss and on/off style projections all
keep this form closed, so probabilities and reduced states are evaluated
through coherent-state overlaps without any photon-number truncation.

Qubit basis indices are big-endian: qubit 0 is the most significant bit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .params import LinkParams

LABEL_RTOL = 1e-12
PRUNE_RTOL = 1e-15

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def as_label(value) -> complex:
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"coherent label must be finite, got {value!r}")
    return z


def coherent_overlap(beta1: complex, beta2: complex) -> complex:
    """<beta1|beta2> for coherent states.

    Written as exp(-|b1 - b2|^2 / 2 + i Im(b1* b2)) which is exact for equal
    labels and avoids cancelling large photon numbers.
    """
    b1 = as_label(beta1)
    b2 = as_label(beta2)
    d = b1 - b2
    phase = b1.real * b2.imag - b1.imag * b2.real
    return cmath.exp(complex(-0.5 * (d.real * d.real + d.imag * d.imag), phase))


def vacuum_amplitude(beta: complex) -> float:
    """<0|beta> (real and positive)."""
    return math.exp(-0.5 * abs(beta) ** 2)


class Branch(NamedTuple):
    ket: int
    bra: int
    ket_labels: tuple
    bra_labels: tuple
    coeff: complex


def _close(a: complex, b: complex) -> bool:
    return abs(a - b) <= LABEL_RTOL * max(1.0, abs(a), abs(b))


def _bit(index: int, qubit: int, n_qubits: int) -> int:
    return (index >> (n_qubits - 1 - qubit)) & 1


def _set_bit(index: int, qubit: int, n_qubits: int, value: int) -> int:
    shift = n_qubits - 1 - qubit
    return (index & ~(1 << shift)) | (value << shift)


def _drop_bit(index: int, qubit: int, n_qubits: int) -> int:
    shift = n_qubits - 1 - qubit
    high = index >> (shift + 1)
    low = index & ((1 << shift) - 1)
    return (high << shift) | low


def _overlap_product(bra_labels: Sequence[complex], ket_labels: Sequence[complex], skip: int | None = None) -> complex:
    out = 1.0 + 0.0j
    for m, (b, k) in enumerate(zip(bra_labels, ket_labels)):
        if m != skip:
            out *= coherent_overlap(b, k)
    return out


@dataclass(frozen=True)
class HybridState:
    """Immutable branch-sum operator; see the module docstring."""

    n_qubits: int
    n_modes: int
    branches: tuple

    @classmethod
    def from_branches(cls, n_qubits: int, n_modes: int, raw: Iterable) -> "HybridState":
        """Canonicalise: snap nearly equal labels, merge equal keys, prune cancellations."""
        reps: list[list[complex]] = [[] for _ in range(n_modes)]

        def snap(mode: int, label: complex) -> complex:
            label = as_label(label)
            for r in reps[mode]:
                if _close(r, label):
                    return r
            reps[mode].append(label)
            return label

        merged: dict = {}
        scale: dict = {}
        dim = 1 << n_qubits
        for ket, bra, kl, bl, c in raw:
            if not (0 <= ket < dim and 0 <= bra < dim):
                raise ValueError("qubit basis index out of range")
            if len(kl) != n_modes or len(bl) != n_modes:
                raise ValueError("label count does not match n_modes")
            c = complex(c)
            if c == 0:
                continue
            kl = tuple(snap(m, x) for m, x in enumerate(kl))
            bl = tuple(snap(m, x) for m, x in enumerate(bl))
            key = (ket, bra, kl, bl)
            merged[key] = merged.get(key, 0.0) + c
            scale[key] = max(scale.get(key, 0.0), abs(c))
        branches = tuple(
            Branch(k[0], k[1], k[2], k[3], c)
            for k, c in merged.items()
            if c != 0 and abs(c) >= PRUNE_RTOL * scale[k]
        )
        return cls(n_qubits, n_modes, branches)

    @classmethod
    def pure(cls, n_qubits: int, n_modes: int, terms: Sequence) -> "HybridState":
        """|psi><psi| for psi = sum_t amp_t |q_t> (x) |labels_t>."""
        terms = [(complex(a), int(q), tuple(as_label(x) for x in labels)) for a, q, labels in terms]
        raw = [
            (qk, qb, lk, lb, ak * ab.conjugate())
            for ak, qk, lk in terms
            for ab, qb, lb in terms
        ]
        return cls.from_branches(n_qubits, n_modes, raw)

    def __len__(self) -> int:
        return len(self.branches)

    def map(self, fn: Callable[[Branch], Iterable], n_modes: int | None = None) -> "HybridState":
        raw = [out for br in self.branches for out in fn(br)]
        return HybridState.from_branches(self.n_qubits, self.n_modes if n_modes is None else n_modes, raw)

    def scaled(self, factor: complex) -> "HybridState":
        return HybridState(self.n_qubits, self.n_modes,
                           tuple(br._replace(coeff=br.coeff * factor) for br in self.branches))

    def __add__(self, other: "HybridState") -> "HybridState":
        if (self.n_qubits, self.n_modes) != (other.n_qubits, other.n_modes):
            raise ValueError("cannot add states on different systems")
        return HybridState.from_branches(self.n_qubits, self.n_modes, self.branches + other.branches)

    def __sub__(self, other: "HybridState") -> "HybridState":
        return self + other.scaled(-1.0)

    def trace(self) -> complex:
        return sum(
            (br.coeff * _overlap_product(br.bra_labels, br.ket_labels)
             for br in self.branches if br.ket == br.bra),
            0.0j,
        )

    def normalized(self) -> "HybridState":
        tr = self.trace().real
        if tr <= 0:
            raise ValueError("cannot normalise a state with non-positive trace")
        return self.scaled(1.0 / tr)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        lookup = {(b.ket, b.bra, b.ket_labels, b.bra_labels): b.coeff for b in self.branches}
        for b in self.branches:
            partner = lookup.get((b.bra, b.ket, b.bra_labels, b.ket_labels))
            if partner is None or abs(partner - b.coeff.conjugate()) > tol:
                return False
        return True

    def labels(self, mode: int) -> list[complex]:
        seen: list[complex] = []
        for br in self.branches:
            for x in (br.ket_labels[mode], br.bra_labels[mode]):
                if x not in seen:
                    seen.append(x)
        return seen


def hs_inner(a: HybridState, b: HybridState) -> complex:
    """Tr(a^dagger b)."""
    total = 0.0j
    for x in a.branches:
        for y in b.branches:
            if x.ket != y.ket or x.bra != y.bra:
                continue
            # Tr[(|qk><qb| |xk><xb|)^dag |qk><qb| |yk><yb|] = <xk|yk><yb|xb>
            total += (x.coeff.conjugate() * y.coeff
                      * _overlap_product(x.ket_labels, y.ket_labels)
                      * _overlap_product(y.bra_labels, x.bra_labels))
    return total


def purity(state: HybridState) -> float:
    return hs_inner(state, state).real


def hs_distance(a: HybridState, b: HybridState) -> float:
    """Hilbert-Schmidt norm of a - b."""
    d = a - b
    return math.sqrt(max(0.0, hs_inner(d, d).real))


def expectation_pure(state: HybridState, terms: Sequence) -> complex:
    """<psi|rho|psi> for psi = sum_t amp_t |q_t>|labels_t> (psi need not be normalised)."""
    total = 0.0j
    for br in state.branches:
        left = sum(
            (complex(a).conjugate() * _overlap_product(labels, br.ket_labels)
             for a, q, labels in terms if q == br.ket),
            0.0j,
        )
        if left == 0:
            continue
        right = sum(
            (complex(a) * _overlap_product(br.bra_labels, labels)
             for a, q, labels in terms if q == br.bra),
            0.0j,
        )
        total += br.coeff * left * right
    return total


def tensor(a: HybridState, b: HybridState) -> HybridState:
    """a (x) b with qubits and modes of ``b`` appended after those of ``a``."""
    shift = b.n_qubits
    raw = [
        ((x.ket << shift) | y.ket, (x.bra << shift) | y.bra,
         x.ket_labels + y.ket_labels, x.bra_labels + y.bra_labels, x.coeff * y.coeff)
        for x in a.branches for y in b.branches
    ]
    return HybridState.from_branches(a.n_qubits + b.n_qubits, a.n_modes + b.n_modes, raw)


def _check_qubit(state: HybridState, qubit: int):
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit index {qubit} out of range for {state.n_qubits} qubits")


def _check_mode(state: HybridState, mode: int):
    if not 0 <= mode < state.n_modes:
        raise IndexError(f"mode index {mode} out of range for {state.n_modes} modes")


def apply_qubit_gate(state: HybridState, qubit: int, gate) -> HybridState:
    """rho -> U rho U^dagger for a 2x2 unitary acting on one qubit."""
    _check_qubit(state, qubit)
    u = np.array(gate, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"single-qubit gate must be 2x2, got shape {u.shape}")
    u[np.abs(u) < 1e-15 * np.abs(u).max()] = 0
    n = state.n_qubits

    def fn(br: Branch):
        bk = _bit(br.ket, qubit, n)
        bb = _bit(br.bra, qubit, n)
        for a in (0, 1):
            ua = u[a, bk]
            if ua == 0:
                continue
            for b in (0, 1):
                ub = u[b, bb]
                if ub == 0:
                    continue
                yield (_set_bit(br.ket, qubit, n, a), _set_bit(br.bra, qubit, n, b),
                       br.ket_labels, br.bra_labels, br.coeff * ua * ub.conjugate())

    return state.map(fn)


def phase_gate(phi: float) -> np.ndarray:
    return np.diag([1.0, cmath.exp(1j * phi)])


def controlled_rotation(state: HybridState, qubit: int, mode: int, theta: float) -> HybridState:
    """Rotate the coherent label of ``mode`` by exp(i theta) on the qubit's |1> component."""
    _check_qubit(state, qubit)
    _check_mode(state, mode)
    if theta == 0:
        return state
    rot = cmath.exp(1j * theta)
    n = state.n_qubits

    def fn(br: Branch):
        kl, bl = list(br.ket_labels), list(br.bra_labels)
        if _bit(br.ket, qubit, n):
            kl[mode] *= rot
        if _bit(br.bra, qubit, n):
            bl[mode] *= rot
        yield br.ket, br.bra, tuple(kl), tuple(bl), br.coeff

    return state.map(fn)


def loss_channel(state: HybridState, mode: int, eta: float) -> HybridState:
    """Pure-loss channel of transmission ``eta`` on one mode.

    The environment picks up sqrt(1 - eta) of each amplitude and is traced
    out, multiplying every dyad by <sqrt(1-eta) beta_bra | sqrt(1-eta) beta_ket>.
    """
    _check_mode(state, mode)
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {eta}")
    if eta == 1.0:
        return state
    t = math.sqrt(eta)
    r = math.sqrt(1.0 - eta)

    def fn(br: Branch):
        kl, bl = list(br.ket_labels), list(br.bra_labels)
        env = coherent_overlap(r * bl[mode], r * kl[mode])
        kl[mode] *= t
        bl[mode] *= t
        yield br.ket, br.bra, tuple(kl), tuple(bl), br.coeff * env

    return state.map(fn)


def add_vacuum_modes(state: HybridState, count: int = 1) -> HybridState:
    pad = (0j,) * count
    return state.map(lambda br: [(br.ket, br.bra, br.ket_labels + pad, br.bra_labels + pad, br.coeff)],
                     n_modes=state.n_modes + count)


def beam_splitter(state: HybridState, i: int, j: int, t: float) -> HybridState:
    """Real beam splitter: (b_i, b_j) -> (t b_i - r b_j, r b_i + t b_j), r = sqrt(1 - t^2)."""
    _check_mode(state, i)
    _check_mode(state, j)
    if i == j or not 0.0 <= t <= 1.0:
        raise ValueError("beam splitter needs two distinct modes and 0 <= t <= 1")
    r = math.sqrt(max(0.0, 1.0 - t * t))

    def mix(labels):
        out = list(labels)
        bi, bj = labels[i], labels[j]
        out[i] = t * bi - r * bj
        out[j] = r * bi + t * bj
        return tuple(out)

    return state.map(lambda br: [(br.ket, br.bra, mix(br.ket_labels), mix(br.bra_labels), br.coeff)])


def displaced_label(beta: complex, gamma: complex) -> tuple[complex, complex]:
    """D(gamma)|beta> = phase |beta + gamma>; returns (new label, phase).

    A result that cancels to within rounding of its inputs is snapped to an
    exact vacuum label.
    """
    new = beta + gamma
    if abs(new) <= LABEL_RTOL * max(abs(beta), abs(gamma)):
        new = 0j
    phase = cmath.exp(1j * (gamma * beta.conjugate()).imag)
    return new, phase


def displace(state: HybridState, mode: int, gamma: complex) -> HybridState:
    _check_mode(state, mode)
    gamma = as_label(gamma)
    if gamma == 0:
        return state

    def fn(br: Branch):
        kl, bl = list(br.ket_labels), list(br.bra_labels)
        kl[mode], pk = displaced_label(kl[mode], gamma)
        bl[mode], pb = displaced_label(bl[mode], gamma)
        yield br.ket, br.bra, tuple(kl), tuple(bl), br.coeff * pk * pb.conjugate()

    return state.map(fn)


# A mode POVM element is given through its coherent-state matrix elements
# <beta_bra| M |beta_ket>; measuring with it removes the mode.
ModePovm = Callable[[complex, complex], complex]


def no_click(bra: complex, ket: complex) -> complex:
    return vacuum_amplitude(bra) * vacuum_amplitude(ket)


def click(bra: complex, ket: complex) -> complex:
    n2 = abs(bra) ** 2 + abs(ket) ** 2
    if n2 < 1.0:
        # <b|k> - <b|0><0|k> = e^{-n2/2} (e^{b* k} - 1); expm1 keeps weak-signal precision
        return math.exp(-0.5 * n2) * complex(np.expm1(bra.conjugate() * ket))
    return coherent_overlap(bra, ket) - no_click(bra, ket)


@dataclass(frozen=True)
class OnOffDetector:
    """Threshold detector with finite efficiency and dark-count probability.

    No-click element: (1 - dark) (1 - efficiency)^n. The defaults give the
    ideal detector.
    """

    efficiency: float = 1.0
    dark_count: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.efficiency <= 1.0 and 0.0 <= self.dark_count < 1.0):
            raise ValueError("efficiency must be in (0, 1] and dark_count in [0, 1)")

    @property
    def ideal(self) -> bool:
        return self.efficiency == 1.0 and self.dark_count == 0.0

    def no_click(self, bra: complex, ket: complex) -> complex:
        if self.ideal:
            return no_click(bra, ket)
        n2 = abs(bra) ** 2 + abs(ket) ** 2
        return (1.0 - self.dark_count) * cmath.exp(-0.5 * n2 + (1.0 - self.efficiency) * bra.conjugate() * ket)

    def click(self, bra: complex, ket: complex) -> complex:
        if self.ideal:
            return click(bra, ket)
        return coherent_overlap(bra, ket) - self.no_click(bra, ket)

    def click_probability(self, beta: complex) -> float:
        return 1.0 - (1.0 - self.dark_count) * math.exp(-self.efficiency * abs(beta) ** 2)


def measure_mode(state: HybridState, mode: int, povm: ModePovm) -> HybridState:
    """Apply a POVM element to ``mode`` and discard the mode (unnormalised result)."""
    _check_mode(state, mode)

    def fn(br: Branch):
        f = povm(br.bra_labels[mode], br.ket_labels[mode])
        if f != 0:
            kl = br.ket_labels[:mode] + br.ket_labels[mode + 1:]
            bl = br.bra_labels[:mode] + br.bra_labels[mode + 1:]
            yield br.ket, br.bra, kl, bl, br.coeff * f

    raw = [out for br in state.branches for out in fn(br)]
    return HybridState.from_branches(state.n_qubits, state.n_modes - 1, raw)


def measure_qubit(state: HybridState, qubit: int, outcome: int) -> HybridState:
    """Project a qubit onto |outcome> and discard it (unnormalised result)."""
    _check_qubit(state, qubit)
    n = state.n_qubits
    raw = [
        (_drop_bit(br.ket, qubit, n), _drop_bit(br.bra, qubit, n), br.ket_labels, br.bra_labels, br.coeff)
        for br in state.branches
        if _bit(br.ket, qubit, n) == outcome and _bit(br.bra, qubit, n) == outcome
    ]
    return HybridState.from_branches(n - 1, state.n_modes, raw)


def trace_out_modes(state: HybridState) -> np.ndarray:
    """Reduced density matrix of the qubits (2^n x 2^n)."""
    dim = 1 << state.n_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    for br in state.branches:
        rho[br.ket, br.bra] += br.coeff * _overlap_product(br.bra_labels, br.ket_labels)
    return rho


def mode_span_density(state: HybridState, mode: int, min_dim: int = 2, rtol: float = 1e-13) -> np.ndarray:
    """Density matrix of the qubits and one mode, the mode expressed in an
    orthonormal basis of the span of its coherent labels; other modes are traced.

    Index order is qubit-major: row = q * d + k. The mode dimension is padded
    with zeros up to ``min_dim``.
    """
    _check_mode(state, mode)
    labels = state.labels(mode)
    gram = np.array([[coherent_overlap(a, b) for b in labels] for a in labels])
    s, v = np.linalg.eigh(gram)
    keep = s > rtol * s.max()
    s, v = s[keep], v[:, keep]
    # coordinates of |label_j> in the orthonormal basis e_l = sum_i v_il |label_i> / sqrt(s_l)
    coords = (np.sqrt(s)[:, None] * v.conj().T)
    d = max(min_dim, coords.shape[0])
    coords = np.vstack([coords, np.zeros((d - coords.shape[0], len(labels)))])
    index = {x: i for i, x in enumerate(labels)}
    nq = 1 << state.n_qubits
    rho = np.zeros((nq * d, nq * d), dtype=complex)
    for br in state.branches:
        other = _overlap_product(br.bra_labels, br.ket_labels, skip=mode)
        vk = coords[:, index[br.ket_labels[mode]]]
        vb = coords[:, index[br.bra_labels[mode]]]
        rho[br.ket * d:(br.ket + 1) * d, br.bra * d:(br.bra + 1) * d] += br.coeff * other * np.outer(vk, vb.conj())
    return rho


def plus_state(n_qubits: int, labels: Sequence[complex]) -> HybridState:
    """All qubits in |+>, modes in the given coherent states."""
    dim = 1 << n_qubits
    amp = 1.0 / math.sqrt(dim)
    return HybridState.pure(n_qubits, len(labels), [(amp, q, labels) for q in range(dim)])


def qubit_qubus_state(params: LinkParams) -> HybridState:
    """Qubit A entangled with the qubus by a +theta rotation, after channel loss."""
    state = plus_state(1, [params.alpha])
    state = controlled_rotation(state, 0, 0, params.theta)
    return loss_channel(state, 0, params.eta)


def rotated_frame_hadamard(xi: float) -> np.ndarray:
    """Hadamard taken in the basis {(|0> +- e^{i xi}|1>)/sqrt(2)}.

    Writing qubit A in that basis and then applying a Hadamard amounts to
    H W^dagger on the physical qubit, which is diag(1, e^{-i xi}).
    """
    w = np.array([[1, 1], [cmath.exp(1j * xi), -cmath.exp(1j * xi)]]) / math.sqrt(2)
    return HADAMARD @ w.conj().T


def build_link_state(params: LinkParams) -> HybridState:
    """Tripartite qubit A - qubus - qubit C state of one elementary link.

    Qubit A is qubit 0, qubit C is qubit 1, the qubus is mode 0. Sequence:
    +theta rotation from A, channel loss, -theta rotation from C, then the
    local frame corrections on A and C that bring the state to the form
    mu_E^2 |Phi+><Phi+| + (1 - mu_E^2) |Phi-><Phi-|.
    """
    eta = params.eta
    xi = params.xi
    state = plus_state(2, [params.alpha])
    state = controlled_rotation(state, 0, 0, params.theta)
    state = loss_channel(state, 0, eta)
    state = controlled_rotation(state, 1, 0, -params.theta)
    state = apply_qubit_gate(state, 0, rotated_frame_hadamard(xi))
    state = apply_qubit_gate(state, 1, phase_gate(eta * xi))
    return state.normalized()
