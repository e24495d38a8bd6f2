"""Exact statevector simulation of gates and Pauli-string exponentials.

State labelling convention: qubit 0 is the leftmost character of a ket
label, i.e. the most significant bit of the amplitude index, so applying X
to qubit 1 of |0000> yields |0100>.

All operations are pure: they copy their input state and never mutate a
shared array.  Evaluations of independent circuits may therefore run
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .pauli import PauliString, PauliSum

NORM_TOL = 1e-12

_SQ = 1.0 / np.sqrt(2.0)
_FIXED_GATES = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex),
}


class QubitCountMismatchError(ValueError):
    """Operator and state act on different qubit counts."""


@dataclass(frozen=True)
class Gate:
    """Elementary gate: X, Z, H, Ry(angle), CNOT, controlled-H, controlled-Ry.

    ``targets`` holds the single target qubit; ``controls`` the control
    qubits (empty for uncontrolled gates).  CNOT is controlled-X.
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    angle: float = 0.0

    def matrix(self) -> np.ndarray:
        """Dense 2x2 matrix acting on the target qubit."""
        if self.kind in _FIXED_GATES:
            return _FIXED_GATES[self.kind].copy()
        if self.kind == "Ry":
            c, s = np.cos(0.5 * self.angle), np.sin(0.5 * self.angle)
            return np.array([[c, -s], [s, c]], dtype=complex)
        raise ValueError(f"unknown gate kind {self.kind!r}")


def gate(kind: str, target: int, *, control: int | None = None,
         angle: float = 0.0) -> Gate:
    """Convenience constructor; ``CNOT`` maps to controlled-X."""
    if kind == "CNOT":
        if control is None:
            raise ValueError("CNOT requires a control qubit")
        return Gate("X", (target,), (control,))
    controls = () if control is None else (control,)
    return Gate(kind, (target,), controls, angle)


@dataclass
class StateVector:
    """Normalized complex amplitudes over 2**n_qubits basis states."""

    n_qubits: int
    amplitudes: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.amplitudes is None:
            amps = np.zeros(2 ** self.n_qubits, dtype=np.complex128)
            amps[0] = 1.0
            self.amplitudes = amps
        else:
            self.amplitudes = np.ascontiguousarray(self.amplitudes,
                                                   dtype=np.complex128)
            if self.amplitudes.shape != (2 ** self.n_qubits,):
                raise ValueError("amplitude length must be 2**n_qubits")

    @classmethod
    def zero_state(cls, n_qubits: int) -> "StateVector":
        return cls(n_qubits)

    @classmethod
    def from_basis_label(cls, label: str) -> "StateVector":
        """State |label> with qubit 0 the leftmost character."""
        n = len(label)
        amps = np.zeros(2 ** n, dtype=np.complex128)
        amps[int(label, 2)] = 1.0
        return cls(n, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.sqrt(np.real(np.vdot(self.amplitudes,
                                             self.amplitudes))))

    def overlap(self, other: "StateVector") -> complex:
        if self.n_qubits != other.n_qubits:
            raise QubitCountMismatchError("qubit-count mismatch in overlap")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def _bit(self, qubit: int) -> int:
        if not 0 <= qubit < self.n_qubits:
            raise IndexError(f"qubit index {qubit} out of range "
                             f"(n_qubits={self.n_qubits})")
        return 1 << (self.n_qubits - 1 - qubit)


def apply_gate(state: StateVector, g: Gate) -> StateVector:
    """Return U|psi> for an elementary gate; norm preserved to 1e-12."""
    out = state.copy()
    target = g.targets[0]
    tbit = out._bit(target)
    cmask = 0
    for c in g.controls:
        if c == target:
            raise ValueError("control qubit equals target qubit")
        cmask |= out._bit(c)
    kernels.apply_1q_gate(out.amplitudes, g.matrix(), tbit, cmask)
    return out


def apply_circuit(state: StateVector, gates) -> StateVector:
    out = state
    for g in gates:
        out = apply_gate(out, g)
    return out


def apply_pauli_exponential(state: StateVector, p: PauliString,
                            angle: float) -> StateVector:
    """Return exp(-i*angle/2 * P)|psi>.

    Uses the two-term identity exp(-i*a/2*P) = cos(a/2) - i sin(a/2) P
    acting on amplitude pairs in O(2**n) time, never a dense matrix.
    """
    if p.n_qubits != state.n_qubits:
        raise QubitCountMismatchError("Pauli string / state qubit mismatch")
    out = state.copy()
    kernels.apply_pauli_exp(out.amplitudes, p.x_mask, p.z_mask,
                            p.n_y % 4, float(angle))
    return out


def expectation(state: StateVector, op: PauliSum) -> complex:
    """<psi|op|psi> by exact contraction.

    Hermitian operators yield a real value up to 1e-12 rounding; the full
    complex number is returned so callers can assert that.
    """
    if op.n_qubits != state.n_qubits:
        raise QubitCountMismatchError("operator / state qubit mismatch")
    xs, zs, ip, cs = op.packed()
    if len(xs) == 0:
        return 0.0 + 0.0j
    return complex(kernels.expectation_terms(state.amplitudes, xs, zs, ip, cs))


def transition_element(bra: StateVector, op: PauliSum,
                       ket: StateVector) -> complex:
    """<bra|op|ket> exactly (statevector privilege)."""
    if bra.n_qubits != ket.n_qubits or op.n_qubits != ket.n_qubits:
        raise QubitCountMismatchError("operator / state qubit mismatch")
    xs, zs, ip, cs = op.packed()
    if len(xs) == 0:
        return 0.0 + 0.0j
    return complex(kernels.transition_terms(bra.amplitudes, ket.amplitudes,
                                            xs, zs, ip, cs))
