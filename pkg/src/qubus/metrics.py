"""Two-qubit entanglement measures and closed-form link quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import LinkParams, one_minus_cos

_SQ2 = 1.0 / math.sqrt(2.0)
BELL_STATES = {
    "phi+": np.array([_SQ2, 0, 0, _SQ2], dtype=complex),
    "phi-": np.array([_SQ2, 0, 0, -_SQ2], dtype=complex),
    "psi+": np.array([0, _SQ2, _SQ2, 0], dtype=complex),
    "psi-": np.array([0, _SQ2, -_SQ2, 0], dtype=complex),
}
_SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


class InvalidDensityMatrix(ValueError):
    pass


def validate_density(rho, tol: float = 1e-12, dim: int | None = 4) -> np.ndarray:
    """Return ``rho`` as a complex array after checking Hermiticity, trace and positivity."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or (dim is not None and rho.shape[0] != dim):
        raise InvalidDensityMatrix(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise InvalidDensityMatrix("matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise InvalidDensityMatrix(f"trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-10:
        raise InvalidDensityMatrix("matrix has negative eigenvalues")
    return rho


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state.

    With rho = X X^dagger the square roots of the eigenvalues of
    rho (Y (x) Y) rho^* (Y (x) Y) are the singular values of X^T (Y (x) Y) X,
    which avoids forming the non-Hermitian product. Eigenvalues of rho at
    rounding level are set to zero: concurrence moves by O(sqrt(eps)) under
    an eps-sized eigenvalue, so keeping them would leak ~1e-8 noise.
    """
    rho = validate_density(rho)
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.where(w > 64 * np.finfo(float).eps * w.max(), w, 0.0)
    x = v * np.sqrt(w)
    lam = np.linalg.svd(x.T @ _SIGMA_YY.real @ x, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def eof_from_concurrence(c: float) -> float:
    c = min(max(c, 0.0), 1.0)
    return binary_entropy(0.5 * (1.0 + math.sqrt(1.0 - c * c)))


def entanglement_of_formation(rho) -> float:
    return eof_from_concurrence(concurrence(rho))


def bell_fidelity(rho, which: str = "phi+") -> float:
    rho = validate_density(rho)
    try:
        v = BELL_STATES[which]
    except KeyError:
        raise ValueError(f"unknown Bell state {which!r}; choose from {sorted(BELL_STATES)}") from None
    return float(np.real(v.conj() @ rho @ v))


def odd_weight(rho) -> float:
    """Population of the odd-parity subspace span{|01>, |10>} (bit-flip weight)."""
    rho = np.asarray(rho)
    return float(rho[1, 1].real + rho[2, 2].real)


def trace_distance(a, b) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))).sum())


@dataclass(frozen=True)
class LinkQuantities:
    mu_B: float
    mu_E: float
    fidelity_F: float
    xi: float
    eta: float

    @property
    def nu_B(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.mu_B**2))

    @property
    def nu_E(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.mu_E**2))


def link_quantities(params: LinkParams) -> LinkQuantities:
    eta = params.eta
    d = params.alpha**2 * one_minus_cos(params.theta)
    f = 0.5 * (1.0 + math.exp(-(1.0 - eta) * d))
    mu_b = math.sqrt(0.5 * (1.0 + math.exp(-eta * d)))
    return LinkQuantities(mu_B=mu_b, mu_E=math.sqrt(f), fidelity_F=f, xi=params.xi, eta=eta)


def alpha_for_fidelity(fidelity: float, eta: float, theta: float) -> float:
    """Invert F = (1 + exp(-(1 - eta) alpha^2 (1 - cos theta))) / 2 for alpha."""
    if not 0.5 < fidelity <= 1.0:
        raise ValueError(f"fidelity must lie in (1/2, 1], got {fidelity}")
    if not 0.0 < eta < 1.0:
        raise ValueError("fidelity fixes alpha only on a lossy link (0 < eta < 1)")
    if theta == 0 or math.cos(theta) == 1.0:
        raise ValueError("theta must be non-zero")
    return math.sqrt(-math.log(2.0 * fidelity - 1.0) / ((1.0 - eta) * one_minus_cos(theta)))


def qubit_qubus_closed_form(params: LinkParams) -> np.ndarray:
    """Qubit-qubus density matrix in the rotated qubit basis and the {u, v} qubus basis.

    A mixture mu_E^2 |Phi+(mu_B)><..| + (1 - mu_E^2) |Psi+(mu_B)><..| with
    Phi+(mu) = mu|0u> + nu|1v> and Psi+(mu) = mu|1u> + nu|0v>; index = 2 q + k.
    """
    lq = link_quantities(params)
    phi = np.array([lq.mu_B, 0, 0, lq.nu_B], dtype=complex)
    psi = np.array([0, lq.nu_B, lq.mu_B, 0], dtype=complex)
    f = lq.fidelity_F
    return f * np.outer(phi, phi.conj()) + (1 - f) * np.outer(psi, psi.conj())
