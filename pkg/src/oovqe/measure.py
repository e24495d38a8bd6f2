"""Spin-free (transition) RDM measurement on statevectors.

Symmetry post-processing is applied at every measurement: operator-level
identities (Gamma_pqrs = Gamma_rspq) hold exactly for the statevector
contraction, and the averaging only removes floating-point round-off.
For ordinary (I = J) RDMs the real-state symmetries gamma = gamma^T and
Gamma_pqrs = Gamma_qpsr are enforced as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fermion import jw_excitation_images
from .statevector import StateVector, expectation, transition_element


@dataclass
class RDMSet:
    """Active-space spin-free 1- and 2-RDMs with a provenance tag.

    For transition sets (bra != ket) ``gamma[p, q] = <I|E_pq|J>`` is not
    symmetric; ``overlap`` records <I|J> used by the frozen-core completion.
    """

    gamma: np.ndarray
    Gamma: np.ndarray
    provenance: str
    overlap: float = 1.0

    @property
    def n_active(self) -> int:
        return self.gamma.shape[0]


def _real(value: complex, what: str, tol: float = 1e-10) -> float:
    if abs(value.imag) > tol:
        raise ValueError(f"{what} acquired imaginary part {value.imag:.3e}")
    return float(value.real)


def measure_rdms(state: StateVector, n_active: int,
                 provenance: str = "state") -> RDMSet:
    """Exact <E_pq> and <e_pqrs> contractions for one state."""
    E, e = jw_excitation_images(n_active)
    n = n_active
    gamma = np.zeros((n, n))
    Gamma = np.zeros((n,) * 4)
    for p in range(n):
        for q in range(p + 1):
            val = _real(expectation(state, E[p][q]), f"gamma[{p},{q}]")
            gamma[p, q] = gamma[q, p] = val
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    if (p, q, r, s) > (r, s, p, q) or (p, q, r, s) > (q, p, s, r):
                        continue
                    val = _real(expectation(state, e[p][q][r][s]),
                                f"Gamma[{p},{q},{r},{s}]")
                    Gamma[p, q, r, s] = val
                    Gamma[r, s, p, q] = val
                    Gamma[q, p, s, r] = val
                    Gamma[s, r, q, p] = val
    return RDMSet(gamma, Gamma, provenance)


def measure_transition_rdms(bra: StateVector, ket: StateVector,
                            n_active: int,
                            provenance: str = "transition") -> RDMSet:
    """<bra|E_pq|ket> and <bra|e_pqrs|ket>; reduces to measure_rdms when
    bra and ket coincide."""
    E, e = jw_excitation_images(n_active)
    n = n_active
    gamma = np.zeros((n, n))
    Gamma = np.zeros((n,) * 4)
    for p in range(n):
        for q in range(n):
            gamma[p, q] = _real(transition_element(bra, E[p][q], ket),
                                f"gamma[{p},{q}]")
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    if (p, q, r, s) > (r, s, p, q):
                        continue
                    val = _real(transition_element(bra, e[p][q][r][s], ket),
                                f"Gamma[{p},{q},{r},{s}]")
                    Gamma[p, q, r, s] = val
                    Gamma[r, s, p, q] = val
    overlap = _real(bra.overlap(ket), "overlap", tol=1e-12)
    return RDMSet(gamma, Gamma, provenance, overlap=overlap)


def average_rdms(sets: list[RDMSet], weights: list[float],
                 provenance: str = "state-averaged") -> RDMSet:
    gamma = sum(w * s.gamma for w, s in zip(weights, sets))
    Gamma = sum(w * s.Gamma for w, s in zip(weights, sets))
    overlap = sum(w * s.overlap for w, s in zip(weights, sets))
    return RDMSet(gamma, Gamma, provenance, overlap=overlap)
