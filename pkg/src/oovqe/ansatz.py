"""Generalized UCC doubles (GUCCD) ansatz and reference-state preparation.

Parameter pool
--------------
One parameter per spin-free pair-double generator ``e_tuvw - h.c.`` with
``e_tuvw = sum_{sigma,tau} adag_{t,sigma} adag_{v,tau} a_{w,tau} a_{u,sigma}``.
Index classes are deduplicated under the pair-exchange symmetry
(t,u,v,w) <-> (v,w,t,u), conjugate classes are identified (they differ
only by the overall sign of the generator), and identically self-adjoint
classes (zero generators) are removed.  Of the remaining classes, those
whose two index pairs are distinct and both non-diagonal are redundant for
state-averaged optimization: on the singlet block they only add directions
reachable through active-orbital-rotation gauge, verified by rank tests.
Dropping them leaves the non-redundant pool: pair doubles (t,u)=(v,w) and
semi-diagonal classes with one diagonal pair.  This yields 3 parameters
for two active orbitals and 12 for three.

Circuit construction
--------------------
Each generator splits into anti-Hermitized spin channels; the Pauli
factors of one channel mutually commute, so each channel exponentiates
exactly as a product of Pauli exponentials.  Channels of one generator
are placed contiguously in a fixed order.  Channels of the semi-diagonal
generators whose diagonal orbital overlaps the excitation pair do not
commute with each other; for those the per-generator product is a single
Trotter factorization of exp(theta*G), which is the ansatz definition.
Parameter-shift differentiation stays exact for the product-form circuit
regardless, via the per-factor chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fermion import FermionOperator, jordan_wigner, spin_free_excitation
from .pauli import PauliString, PauliSum
from .statevector import Gate, StateVector, apply_circuit, gate
from . import kernels


# ---------------------------------------------------------------------------
# reference states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HF:
    """Closed-shell Hartree-Fock determinant."""


@dataclass(frozen=True)
class CIS:
    """HOMO-LUMO-type singlet singly-excited state (|D_up> - |D_dn>)/sqrt(2)."""

    h: int
    l: int


@dataclass(frozen=True)
class Rotated:
    """cos(phi)|HF> + sin(phi)|CIS(h,l)>, prepared by the rotation circuit."""

    phi: float
    h: int
    l: int


ReferenceState = HF | CIS | Rotated


def _check_hl(h: int, l: int, n_active: int, n_elec: int) -> None:
    n_occ = n_elec // 2
    if not (0 <= h < n_occ):
        raise ValueError(f"h={h} is not an occupied active orbital")
    if not (n_occ <= l < n_active):
        raise ValueError(f"l={l} is not a virtual active orbital")


def rotation_circuit(phi: float, h: int, l: int, n_active: int,
                     n_elec: int) -> list[Gate]:
    """Gate sequence preparing cos(phi)|HF> + sin(phi)|CIS(h,l)>.

    Layer structure (parallel single-qubit gates share a layer): 1. Ry(2phi)
    on the h-up qubit together with X on h-down and on all other occupied
    qubits; 2. controlled-H (control h-up, target l-down); 3-5. three
    CNOTs; 6. X on h-up and Z on l-down.  Depth 6 under the layer
    convention.
    """
    _check_hl(h, l, n_active, n_elec)
    qh_up, qh_dn = 2 * h, 2 * h + 1
    ql_up, ql_dn = 2 * l, 2 * l + 1
    gates = [gate("Ry", qh_up, angle=2.0 * phi), gate("X", qh_dn)]
    for m in range(n_elec):
        if m not in (qh_up, qh_dn):
            gates.append(gate("X", m))
    gates += [
        gate("H", ql_dn, control=qh_up),
        gate("CNOT", qh_up, control=ql_dn),
        gate("CNOT", qh_dn, control=ql_dn),
        gate("CNOT", ql_up, control=qh_up),
        gate("X", qh_up),
        gate("Z", ql_dn),
    ]
    return gates


ROTATION_CIRCUIT_DEPTH = 6  # parallel layers of the sequence above


def prepare_reference(kind: ReferenceState, n_active: int,
                      n_elec: int) -> StateVector:
    """Prepare a reference state in the active space.

    HF is the closed-shell determinant with the lowest n_elec/2 orbitals
    doubly occupied; CIS(h, l) is the singlet singly-excited combination
    (|h_up -> l_up> - |h_dn -> l_dn>)/sqrt(2); Rotated(phi, h, l) is their
    cos/sin superposition, built by the rotation circuit.
    """
    if n_elec % 2:
        raise ValueError("closed-shell reference requires an even electron count")
    if n_elec > 2 * n_active:
        raise ValueError("more electrons than active spin orbitals")
    zero = StateVector.zero_state(2 * n_active)
    if isinstance(kind, HF):
        gates = [gate("X", m) for m in range(n_elec)]
        return apply_circuit(zero, gates)
    if isinstance(kind, CIS):
        kind = Rotated(np.pi / 2.0, kind.h, kind.l)
    if isinstance(kind, Rotated):
        return apply_circuit(zero, rotation_circuit(kind.phi, kind.h, kind.l,
                                                    n_active, n_elec))
    raise TypeError(f"unknown reference kind {kind!r}")


# ---------------------------------------------------------------------------
# the doubles pool
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GuccdGenerator:
    """One pool member: anti-Hermitian spin-free pair-double generator.

    ``factors`` lists (PauliString, weight) in circuit order; the circuit
    applies exp(-i * weight * theta / 2 * P) per factor.  ``components``
    are the anti-Hermitized spin channels (each with internally commuting
    factors); ``component_sizes`` gives the contiguous factor grouping.
    """

    key: tuple[tuple[int, int], tuple[int, int]]
    operator: FermionOperator
    qubit_image: PauliSum
    components: tuple[PauliSum, ...]
    factors: tuple[tuple[PauliString, float], ...]
    component_sizes: tuple[int, ...]

    @property
    def all_factors_commute(self) -> bool:
        strs = [s for s, _ in self.factors]
        return all(a.commutes_with(b) for a in strs for b in strs)


def _pair_classes(n_active: int):
    """Dedup index classes; see module docstring for the policy."""
    pairs = [(t, u) for t in range(n_active) for u in range(n_active)]
    seen: set = set()
    reps = []
    for P in pairs:
        for Q in pairs:
            key = tuple(sorted([P, Q]))
            if key in seen:
                continue
            conj = tuple(sorted([(P[1], P[0]), (Q[1], Q[0])]))
            if conj == key or conj in seen:
                seen.add(key)
                continue
            seen.add(key)
            A, B = key
            keep = (A == B) or (A[0] == A[1]) or (B[0] == B[1])
            if keep:
                reps.append(key)
    return reps


def _spin_components(key, n_active: int):
    """Anti-Hermitized (sigma, tau) channels, identical channels merged."""
    (t, u), (v, w) = key
    channels = []
    for sg in (0, 1):
        for tu in (0, 1):
            T = FermionOperator.single(
                1.0, ((2 * t + sg, True), (2 * v + tu, True),
                      (2 * w + tu, False), (2 * u + sg, False)))
            A = (T - T.dagger()).normal_ordered()
            if A.terms:
                channels.append(A)
    merged: list[tuple[FermionOperator, int]] = []
    for A in channels:
        for i, (B, k) in enumerate(merged):
            if A.isclose(B):
                merged[i] = (B, k + 1)
                break
        else:
            merged.append((A, 1))
    return [B * float(k) for B, k in merged]


@lru_cache(maxsize=16)
def enumerate_doubles(n_active: int) -> tuple[GuccdGenerator, ...]:
    """Non-redundant GUCCD pool in fixed lexicographic class order.

    Three active orbitals yield 12 parameters; two yield 3.
    """
    if n_active < 2:
        raise ValueError("GUCCD needs at least two active orbitals")
    n_modes = 2 * n_active
    pool = []
    for key in _pair_classes(n_active):
        comps = _spin_components(key, n_active)
        comp_images = tuple(jordan_wigner(c, n_modes) for c in comps)
        factors: list[tuple[PauliString, float]] = []
        sizes = []
        for ps in comp_images:
            terms = ps.terms
            sizes.append(len(terms))
            for coeff, string in terms:
                if abs(coeff.real) > 1e-12:
                    raise AssertionError(
                        "anti-Hermitian generator mapped to real Pauli weight")
                # image = i*c*P; circuit factor exp(i*theta*c*P)
                # = exp(-i*(-2c*theta)/2 * P), so the chain weight is -2c
                factors.append((string, -2.0 * coeff.imag))
        total = comp_images[0]
        for ps in comp_images[1:]:
            total = total + ps
        (tt, uu), (vv, ww) = key
        op = FermionOperator.zero()
        for c in comps:
            op = op + c
        pool.append(GuccdGenerator(
            key=key, operator=op, qubit_image=total,
            components=comp_images, factors=tuple(factors),
            component_sizes=tuple(sizes)))
    return tuple(pool)


def doubles_index_map(n_active: int) -> dict[int, tuple]:
    """Parameter index -> canonical (t, u, v, w) class representative."""
    return {j: (g.key[0][0], g.key[0][1], g.key[1][0], g.key[1][1])
            for j, g in enumerate(enumerate_doubles(n_active))}


# ---------------------------------------------------------------------------
# compiled circuit
# ---------------------------------------------------------------------------

class CompiledAnsatz:
    """GUCCD circuit packed for the kernels.

    The circuit is the ordered product over parameters (lexicographic class
    order) of per-factor Pauli exponentials; factor angles are
    weight * theta[param] plus an optional per-factor shift used by the
    parameter-shift engine.
    """

    def __init__(self, n_active: int, n_elec: int):
        self.n_active = n_active
        self.n_elec = n_elec
        self.pool = enumerate_doubles(n_active)
        self.n_params = len(self.pool)
        xs, zs, ip, w, pidx = [], [], [], [], []
        for j, gen in enumerate(self.pool):
            for string, weight in gen.factors:
                xs.append(string.x_mask)
                zs.append(string.z_mask)
                ip.append(string.n_y % 4)
                w.append(weight)
                pidx.append(j)
        self.x_masks = np.array(xs, dtype=np.int64)
        self.z_masks = np.array(zs, dtype=np.int64)
        self.i_pows = np.array(ip, dtype=np.int64)
        self.weights = np.array(w, dtype=float)
        self.param_idx = np.array(pidx, dtype=np.int64)
        self.n_factors = len(w)

    def factor_slices(self, j: int) -> np.ndarray:
        """Factor positions belonging to parameter j."""
        return np.nonzero(self.param_idx == j)[0]

    def angles(self, theta: np.ndarray,
               shifts: dict[int, float] | None = None) -> np.ndarray:
        a = self.weights * np.asarray(theta, dtype=float)[self.param_idx]
        if shifts:
            for pos, delta in shifts.items():
                a[pos] += delta
        return a

    def apply(self, theta: np.ndarray, reference: StateVector,
              shifts: dict[int, float] | None = None) -> StateVector:
        """U(theta)|ref>, with optional per-factor angle shifts."""
        out = reference.copy()
        kernels.apply_pauli_exp_sequence(
            out.amplitudes, self.x_masks, self.z_masks, self.i_pows,
            self.angles(theta, shifts))
        return out


def build_ansatz(n_active: int, n_elec: int,
                 theta: np.ndarray) -> list[tuple[PauliString, float]]:
    """Deterministic ordered Pauli-exponential list for U(theta).

    Returns (string, angle) pairs with the exp(-i*angle/2*P) convention;
    commuting factors of each spin channel appear contiguously.
    """
    compiled = CompiledAnsatz(n_active, n_elec)
    if len(theta) != compiled.n_params:
        raise ValueError(
            f"theta has {len(theta)} entries, pool has {compiled.n_params}")
    a = compiled.angles(np.asarray(theta, dtype=float))
    out = []
    pos = 0
    for gen in compiled.pool:
        for string, _ in gen.factors:
            out.append((string, float(a[pos])))
            pos += 1
    return out


# ---------------------------------------------------------------------------
# depth accounting
# ---------------------------------------------------------------------------

# Gate-depth convention used for the headline CAS(4,3) number: every
# parameter contributes 4 spin channels of 8 weight-4-equivalent Pauli
# exponentials, each compiled as a 3-CNOT ladder, one Rz, and the mirrored
# ladder (7 layers).  The rotation circuit adds its 6 layers.
PAULI_EXP_LAYERS = 7
SPIN_CHANNELS_PER_DOUBLE = 4
STRINGS_PER_CHANNEL = 8


def ansatz_depth_paper_convention(n_params: int) -> int:
    return n_params * SPIN_CHANNELS_PER_DOUBLE * STRINGS_PER_CHANNEL * PAULI_EXP_LAYERS


def ansatz_factor_count(n_active: int) -> int:
    """Number of Pauli-exponential factors actually applied per circuit."""
    return sum(len(g.factors) for g in enumerate_doubles(n_active))
