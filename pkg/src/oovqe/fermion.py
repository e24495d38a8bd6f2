"""Second-quantized operators, Jordan-Wigner mapping and the dense oracle.

Spin-orbital ordering is interleaved: mode 2p is spatial orbital p with
spin up, mode 2p+1 is p with spin down.  Mode m maps to qubit m, so the
CAS(2 electrons, 2 orbitals) Hartree-Fock determinant is |1100>.

All operator coefficients are real; complex Hamiltonians are rejected at
ingestion since the whole derivative machinery assumes real algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .pauli import PauliString, PauliSum
from .statevector import StateVector

_ZERO_TOL = 1e-14


class SectorError(ValueError):
    """Requested particle-number / S_z sector is empty or too small."""


# ---------------------------------------------------------------------------
# fermionic operators
# ---------------------------------------------------------------------------

class FermionOperator:
    """Real linear combination of products of creation/annihilation operators.

    Terms map an ordered tuple of (mode, is_creation) pairs to a real
    coefficient.  ``normal_ordered`` rewrites to the unique canonical form
    (creations ascending, then annihilations descending) used for equality.
    """

    def __init__(self, terms: dict[tuple, float] | None = None):
        self.terms: dict[tuple, float] = {}
        for ops, coeff in (terms or {}).items():
            if abs(coeff) > _ZERO_TOL:
                self.terms[tuple(ops)] = self.terms.get(tuple(ops), 0.0) + coeff

    @classmethod
    def single(cls, coeff: float, ops: tuple) -> "FermionOperator":
        return cls({tuple(ops): float(coeff)})

    @classmethod
    def zero(cls) -> "FermionOperator":
        return cls({})

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        acc = dict(self.terms)
        for ops, c in other.terms.items():
            acc[ops] = acc.get(ops, 0.0) + c
        return FermionOperator(acc)

    def __sub__(self, other: "FermionOperator") -> "FermionOperator":
        return self + (other * -1.0)

    def __mul__(self, scalar: float) -> "FermionOperator":
        return FermionOperator({ops: c * scalar for ops, c in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "FermionOperator") -> "FermionOperator":
        acc: dict[tuple, float] = {}
        for ops1, c1 in self.terms.items():
            for ops2, c2 in other.terms.items():
                key = ops1 + ops2
                acc[key] = acc.get(key, 0.0) + c1 * c2
        return FermionOperator(acc)

    def dagger(self) -> "FermionOperator":
        acc: dict[tuple, float] = {}
        for ops, c in self.terms.items():
            conj = tuple((m, not cr) for m, cr in reversed(ops))
            acc[conj] = acc.get(conj, 0.0) + c
        return FermionOperator(acc)

    def max_mode(self) -> int:
        return max((m for ops in self.terms for m, _ in ops), default=-1)

    def normal_ordered(self) -> "FermionOperator":
        """Canonical form: creations ascending by mode, annihilations
        descending, with exact fermionic sign bookkeeping."""
        acc: dict[tuple, float] = {}
        stack = [(ops, coeff) for ops, coeff in self.terms.items()]
        while stack:
            ops, coeff = stack.pop()
            ops = list(ops)
            i = 0
            reordered = False
            while i < len(ops) - 1:
                (m1, c1), (m2, c2) = ops[i], ops[i + 1]
                if (not c1) and c2:
                    # a_m1 adag_m2 = delta - adag_m2 a_m1
                    if m1 == m2:
                        rest = ops[:i] + ops[i + 2:]
                        stack.append((tuple(rest), coeff))
                    swapped = ops[:i] + [(m2, c2), (m1, c1)] + ops[i + 2:]
                    stack.append((tuple(swapped), -coeff))
                    reordered = True
                    break
                if c1 == c2:
                    if m1 == m2:
                        reordered = True  # adag adag or a a on one mode: zero
                        break
                    want_swap = (m1 > m2) if c1 else (m1 < m2)
                    if want_swap:
                        ops[i], ops[i + 1] = ops[i + 1], ops[i]
                        coeff = -coeff
                        i = max(i - 1, 0)
                        continue
                i += 1
            else:
                key = tuple(ops)
                acc[key] = acc.get(key, 0.0) + coeff
                continue
            if not reordered:  # pragma: no cover
                acc[tuple(ops)] = acc.get(tuple(ops), 0.0) + coeff
        return FermionOperator(acc)

    def isclose(self, other: "FermionOperator", tol: float = 1e-12) -> bool:
        a = self.normal_ordered().terms
        b = other.normal_ordered().terms
        keys = set(a) | set(b)
        return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= tol for k in keys)

    def __repr__(self) -> str:  # pragma: no cover
        def fmt(ops):
            return " ".join(f"a{'+' if cr else ''}_{m}" for m, cr in ops) or "1"
        parts = [f"{c:+.6g} [{fmt(ops)}]" for ops, c in
                 sorted(self.terms.items())[:6]]
        return "FermionOperator(" + " ".join(parts) + ")"


def _check_orbital(p: int, n_active: int) -> None:
    if not 0 <= p < n_active:
        raise IndexError(f"orbital index {p} outside active space "
                         f"of {n_active} orbitals")


def spin_free_excitation(p: int, q: int, n_active: int) -> FermionOperator:
    """E_pq = sum_sigma adag_{p,sigma} a_{q,sigma}."""
    _check_orbital(p, n_active)
    _check_orbital(q, n_active)
    op = FermionOperator.zero()
    for s in (0, 1):
        op = op + FermionOperator.single(
            1.0, ((2 * p + s, True), (2 * q + s, False)))
    return op.normal_ordered()


def spin_free_pair_excitation(p: int, q: int, r: int, s: int,
                              n_active: int) -> FermionOperator:
    """e_pqrs = sum_{sigma,tau} adag_{p,sigma} adag_{r,tau} a_{s,tau} a_{q,sigma}."""
    for idx in (p, q, r, s):
        _check_orbital(idx, n_active)
    op = FermionOperator.zero()
    for sg in (0, 1):
        for tu in (0, 1):
            op = op + FermionOperator.single(
                1.0, ((2 * p + sg, True), (2 * r + tu, True),
                      (2 * s + tu, False), (2 * q + sg, False)))
    return op.normal_ordered()


# ---------------------------------------------------------------------------
# Jordan-Wigner mapping
# ---------------------------------------------------------------------------

def _jw_mode_op(mode: int, creation: bool, n_qubits: int) -> PauliSum:
    # adag_m = Z_0..Z_{m-1} (X_m - i Y_m)/2 ; a_m has +i.
    z_chain = 0
    for k in range(mode):
        z_chain |= 1 << (n_qubits - 1 - k)
    mbit = 1 << (n_qubits - 1 - mode)
    x_str = PauliString(n_qubits, mbit, z_chain)
    y_str = PauliString(n_qubits, mbit, z_chain | mbit)
    sign = -1.0 if creation else 1.0
    return PauliSum.from_terms([(0.5, x_str), (sign * 0.5j, y_str)])


def jordan_wigner(op: FermionOperator, n_modes: int | None = None) -> PauliSum:
    """Map a FermionOperator to its qubit image.

    The dense matrix of the result in the occupation-number basis equals
    the fermionic matrix under the interleaved mode-to-qubit ordering.
    """
    if n_modes is None:
        n_modes = op.max_mode() + 1
    n_modes = max(n_modes, 1)
    total = PauliSum.zero(n_modes)
    for ops, coeff in op.terms.items():
        part = PauliSum.scalar(n_modes, coeff)
        for mode, creation in ops:
            if mode >= n_modes:
                raise ValueError(f"mode {mode} exceeds n_modes={n_modes}")
            part = part @ _jw_mode_op(mode, creation, n_modes)
        total = total + part
    return total


@lru_cache(maxsize=32)
def jw_excitation_images(n_active: int):
    """Cached JW images of all E_pq and e_pqrs over the active space.

    Returns (E, e) with E[p][q] and e[p][q][r][s] as PauliSums on
    2*n_active qubits.
    """
    n_modes = 2 * n_active
    E = [[jordan_wigner(spin_free_excitation(p, q, n_active), n_modes)
          for q in range(n_active)] for p in range(n_active)]
    e = [[[[jordan_wigner(
        spin_free_pair_excitation(p, q, r, s, n_active), n_modes)
        for s in range(n_active)] for r in range(n_active)]
        for q in range(n_active)] for p in range(n_active)]
    return E, e


# ---------------------------------------------------------------------------
# active-space Hamiltonian
# ---------------------------------------------------------------------------

@dataclass
class ActiveHamiltonian:
    """Active-space one-/two-body integrals plus frozen-core scalar (Ha)."""

    h_eff: np.ndarray
    g_act: np.ndarray
    e_core: float
    n_active: int
    n_elec_active: int
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.h_eff = np.asarray(self.h_eff, dtype=float)
        self.g_act = np.asarray(self.g_act, dtype=float)
        n = self.n_active
        if self.h_eff.shape != (n, n) or self.g_act.shape != (n, n, n, n):
            raise ValueError("integral shapes inconsistent with n_active")
        if self.validate:
            if not np.allclose(self.h_eff, self.h_eff.T, atol=1e-10):
                raise ValueError("h_eff must be symmetric")
            for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
                if not np.allclose(self.g_act, self.g_act.transpose(perm),
                                   atol=1e-10):
                    raise ValueError("g_act must have 8-fold symmetry")

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_active

    def to_qubit(self) -> PauliSum:
        """H = sum h_pq E_pq + 1/2 sum g_pqrs e_pqrs + e_core as a PauliSum."""
        return build_qubit_operator(self.h_eff, self.g_act, self.e_core,
                                    self.n_active)


def build_qubit_operator(h: np.ndarray, g: np.ndarray, scalar: float,
                         n_active: int) -> PauliSum:
    """Qubit image of a generic spin-free one-plus-two-body operator."""
    E, e = jw_excitation_images(n_active)
    total = PauliSum.scalar(2 * n_active, float(scalar))
    for p in range(n_active):
        for q in range(n_active):
            if abs(h[p, q]) > _ZERO_TOL:
                total = total + E[p][q] * float(h[p, q])
    for p in range(n_active):
        for q in range(n_active):
            for r in range(n_active):
                for s in range(n_active):
                    if abs(g[p, q, r, s]) > _ZERO_TOL:
                        total = total + e[p][q][r][s] * (0.5 * float(g[p, q, r, s]))
    return total


# ---------------------------------------------------------------------------
# sector masking and the dense oracle
# ---------------------------------------------------------------------------

def mode_occupations(index: int, n_modes: int) -> np.ndarray:
    """Occupation of each mode in a computational-basis index."""
    return np.array([(index >> (n_modes - 1 - m)) & 1 for m in range(n_modes)])


def sector_indices(n_active: int, n_elec: int, two_sz: int = 0) -> np.ndarray:
    """Basis indices with the given particle number and 2*S_z.

    Sector projection is done by masking basis states, never by penalty
    terms, so the restriction is exact.
    """
    n_modes = 2 * n_active
    keep = []
    for b in range(2 ** n_modes):
        occ = mode_occupations(b, n_modes)
        if occ.sum() != n_elec:
            continue
        sz2 = int(occ[0::2].sum() - occ[1::2].sum())
        if sz2 == two_sz:
            keep.append(b)
    return np.array(keep, dtype=np.int64)


def exact_subspace_oracle(h: ActiveHamiltonian, n_states: int,
                          two_sz: int = 0):
    """Lowest eigenpairs of the qubit Hamiltonian in the (N, S_z) sector.

    Returns a list of (energy, StateVector) sorted ascending; the vectors
    are embedded in the full 2**n_qubits space.  Energies include e_core.
    """
    if h.n_active > 8:
        raise ValueError("dense diagonalization limited to n_active <= 8")
    idx = sector_indices(h.n_active, h.n_elec_active, two_sz)
    if len(idx) == 0:
        raise SectorError(
            f"empty sector N={h.n_elec_active}, 2Sz={two_sz}")
    if n_states > len(idx):
        raise SectorError(
            f"requested {n_states} states from a {len(idx)}-dim sector")
    dense = h.to_qubit().to_matrix()
    block = dense[np.ix_(idx, idx)]
    if np.abs(block.imag).max() > 1e-10:
        raise ValueError("Hamiltonian block acquired imaginary parts")
    vals, vecs = np.linalg.eigh(block.real)
    out = []
    for k in range(n_states):
        full = np.zeros(dense.shape[0], dtype=np.complex128)
        full[idx] = vecs[:, k]
        out.append((float(vals[k]), StateVector(h.n_qubits, full)))
    return out


def number_operator(n_active: int) -> PauliSum:
    op = FermionOperator.zero()
    for m in range(2 * n_active):
        op = op + FermionOperator.single(1.0, ((m, True), (m, False)))
    return jordan_wigner(op, 2 * n_active)


def sz_operator(n_active: int) -> PauliSum:
    op = FermionOperator.zero()
    for m in range(2 * n_active):
        sign = 0.5 if m % 2 == 0 else -0.5
        op = op + FermionOperator.single(sign, ((m, True), (m, False)))
    return jordan_wigner(op, 2 * n_active)
