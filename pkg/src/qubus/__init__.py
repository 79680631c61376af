"""Coherent-state qubus links between distant qubits.

Exact branch-sum algebra for qubits coupled to coherent-state modes, closed
forms and receiver models for heralding two-qubit entanglement, a truncated
photon-number oracle, hybrid entanglement swapping and a sweep CLI.
"""

from .hybrid import HybridState, OnOffDetector, build_link_state, coherent_overlap, qubit_qubus_state
from .metrics import (
    bell_fidelity,
    concurrence,
    entanglement_of_formation,
    link_quantities,
    qubit_qubus_closed_form,
)
from .params import LinkParams, transmission
from .swapping import entanglement_swap, hybrid_bell_measure, link_attempt_statistics
from .usd import (
    classify_and_condition,
    pattern_distribution,
    pattern_probabilities,
    usd_failure_bound_from_fidelity,
    usd_optimal_failure,
)

__version__ = "0.1.0"

__all__ = [
    "HybridState", "OnOffDetector", "build_link_state", "coherent_overlap", "qubit_qubus_state",
    "bell_fidelity", "concurrence", "entanglement_of_formation", "link_quantities", "qubit_qubus_closed_form",
    "LinkParams", "transmission", "entanglement_swap", "hybrid_bell_measure", "link_attempt_statistics",
    "classify_and_condition", "pattern_distribution", "pattern_probabilities",
    "usd_failure_bound_from_fidelity", "usd_optimal_failure",
]
