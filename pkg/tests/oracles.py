"""Independent oracles for the test suite.

Everything here deliberately avoids the package's Pauli/JW machinery:
determinant-basis CI uses direct fermionic action on occupation
bitstrings, dense qubit operators are built from explicit 2x2 matrices,
and the wavefunction-overlap derivative oracle works with Slater
determinant overlaps between geometries.
"""

from __future__ import annotations

import itertools

import numpy as np

# ---------------------------------------------------------------------------
# dense qubit operators from letter strings (independent of oovqe.pauli)
# ---------------------------------------------------------------------------

_P2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(label: str) -> np.ndarray:
    m = np.array([[1.0 + 0j]])
    for ch in label:
        m = np.kron(m, _P2[ch])
    return m


def paulisum_matrix(terms) -> np.ndarray:
    """terms: iterable of (coeff, label)."""
    terms = list(terms)
    dim = 2 ** len(terms[0][1])
    out = np.zeros((dim, dim), dtype=complex)
    for coeff, label in terms:
        out += coeff * pauli_matrix(label)
    return out


# ---------------------------------------------------------------------------
# fermionic Fock-space action on occupation bitstrings
# ---------------------------------------------------------------------------
# A determinant over n spin-orbital modes is an integer whose bit
# (n - 1 - m) flags occupation of mode m, matching the package's qubit
# labelling; states are dicts {bitstring: coefficient}.

def _bit(n_modes: int, mode: int) -> int:
    return 1 << (n_modes - 1 - mode)


def _jw_sign(det: int, n_modes: int, mode: int) -> float:
    mask = 0
    for m in range(mode):
        mask |= _bit(n_modes, m)
    return -1.0 if bin(det & mask).count("1") % 2 else 1.0


def apply_annihilation(state: dict, mode: int, n_modes: int) -> dict:
    out: dict = {}
    b = _bit(n_modes, mode)
    for det, c in state.items():
        if det & b:
            new = det & ~b
            out[new] = out.get(new, 0.0) + c * _jw_sign(det, n_modes, mode)
    return out


def apply_creation(state: dict, mode: int, n_modes: int) -> dict:
    out: dict = {}
    b = _bit(n_modes, mode)
    for det, c in state.items():
        if not det & b:
            new = det | b
            out[new] = out.get(new, 0.0) + c * _jw_sign(det, n_modes, mode)
    return out


def apply_excitation(state: dict, p: int, q: int, n_modes: int) -> dict:
    """Spin-free E_pq applied to a determinant expansion."""
    out: dict = {}
    for s in (0, 1):
        tmp = apply_annihilation(state, 2 * q + s, n_modes)
        tmp = apply_creation(tmp, 2 * p + s, n_modes)
        for det, c in tmp.items():
            out[det] = out.get(det, 0.0) + c
    return out


def apply_hamiltonian(state: dict, h: np.ndarray, g: np.ndarray,
                      n_modes: int) -> dict:
    """H = sum h_pq E_pq + 1/2 sum g_pqrs (E_pq E_rs - delta_qr E_ps)."""
    n = h.shape[0]
    out: dict = {}

    def add(target, scale):
        for det, c in target.items():
            out[det] = out.get(det, 0.0) + scale * c

    for p in range(n):
        for q in range(n):
            if h[p, q] != 0.0:
                add(apply_excitation(state, p, q, n_modes), h[p, q])
    for r in range(n):
        for s in range(n):
            ers = apply_excitation(state, r, s, n_modes)
            for p in range(n):
                for q in range(n):
                    if g[p, q, r, s] == 0.0:
                        continue
                    add(apply_excitation(ers, p, q, n_modes),
                        0.5 * g[p, q, r, s])
                    if q == r:
                        add(apply_excitation(state, p, s, n_modes),
                            -0.5 * g[p, q, r, s])
    return out


def determinant_basis(n_orb: int, n_up: int, n_dn: int,
                      frozen: tuple[int, ...] = ()) -> list[int]:
    """All determinants with the given spin occupations, optionally with
    frozen spatial orbitals forced doubly occupied."""
    n_modes = 2 * n_orb
    dets = []
    orbitals = range(n_orb)
    for up in itertools.combinations(orbitals, n_up):
        if any(f not in up for f in frozen):
            continue
        for dn in itertools.combinations(orbitals, n_dn):
            if any(f not in dn for f in frozen):
                continue
            det = 0
            for o in up:
                det |= _bit(n_modes, 2 * o)
            for o in dn:
                det |= _bit(n_modes, 2 * o + 1)
            dets.append(det)
    return sorted(dets)


def ci_matrix(h: np.ndarray, g: np.ndarray, dets: list[int],
              n_orb: int) -> np.ndarray:
    """Hamiltonian matrix in the determinant basis by direct action."""
    n_modes = 2 * n_orb
    index = {d: i for i, d in enumerate(dets)}
    H = np.zeros((len(dets), len(dets)))
    for j, det in enumerate(dets):
        image = apply_hamiltonian({det: 1.0}, h, g, n_modes)
        for d, c in image.items():
            if d in index:
                H[index[d], j] += c
    return H


def ci_eigensystem(h: np.ndarray, g: np.ndarray, e_core: float, n_orb: int,
                   n_elec: int, frozen: tuple[int, ...] = (),
                   n_states: int | None = None):
    """Lowest CI eigenpairs in the S_z = 0 determinant basis.

    Returns (energies, vectors, dets); energies include e_core.
    """
    dets = determinant_basis(n_orb, n_elec // 2, n_elec - n_elec // 2, frozen)
    H = ci_matrix(h, g, dets, n_orb)
    vals, vecs = np.linalg.eigh(H)
    k = len(vals) if n_states is None else n_states
    return vals[:k] + e_core, vecs[:, :k], dets


def rdm_from_ci(dets, vec_bra, vec_ket, n_orb: int):
    """Spin-free transition 1- and 2-RDMs from determinant CI vectors."""
    n_modes = 2 * n_orb
    index = {d: i for i, d in enumerate(dets)}
    gamma = np.zeros((n_orb, n_orb))
    Gamma = np.zeros((n_orb,) * 4)

    def element(image) -> float:
        return sum(vec_bra[index[d]] * c for d, c in image.items()
                   if d in index)

    for p in range(n_orb):
        for q in range(n_orb):
            state = {d: vec_ket[i] for i, d in enumerate(dets)}
            gamma[p, q] = element(apply_excitation(state, p, q, n_modes))
    for p in range(n_orb):
        for q in range(n_orb):
            for r in range(n_orb):
                for s in range(n_orb):
                    state = {d: vec_ket[i] for i, d in enumerate(dets)}
                    tmp = apply_excitation(state, r, s, n_modes)
                    tmp = apply_excitation(tmp, p, q, n_modes)
                    val = element(tmp)
                    if q == r:
                        tmp2 = apply_excitation(state, p, s, n_modes)
                        val -= element(tmp2)
                    Gamma[p, q, r, s] = val
    return gamma, Gamma


# ---------------------------------------------------------------------------
# brute-force integral transform
# ---------------------------------------------------------------------------

def naive_two_electron_transform(g_ao: np.ndarray, C: np.ndarray) -> np.ndarray:
    n_ao = g_ao.shape[0]
    n_mo = C.shape[1]
    out = np.zeros((n_mo,) * 4)
    for p in range(n_mo):
        for q in range(n_mo):
            for r in range(n_mo):
                for s in range(n_mo):
                    val = 0.0
                    for mu in range(n_ao):
                        for nu in range(n_ao):
                            for lam in range(n_ao):
                                for sig in range(n_ao):
                                    val += (C[mu, p] * C[nu, q] * C[lam, r]
                                            * C[sig, s]
                                            * g_ao[mu, nu, lam, sig])
                    out[p, q, r, s] = val
    return out


# ---------------------------------------------------------------------------
# cross-geometry wavefunction overlaps (NAC derivative oracle)
# ---------------------------------------------------------------------------

def occupied_spinorbitals(bits: int, n_act_qubits: int, partition):
    """Full-space (orbital, spin) occupation list for one active determinant."""
    occ = []
    for f in partition.frozen:
        occ.append((f, 0))
        occ.append((f, 1))
    act = list(partition.active)
    for q in range(n_act_qubits):
        if (bits >> (n_act_qubits - 1 - q)) & 1:
            occ.append((act[q // 2], q % 2))
    occ.sort(key=lambda t: 2 * t[0] + t[1])
    return occ


def statevector_overlap(state_a, ints_a, state_b, ints_b,
                        s_cross_ao: np.ndarray) -> float:
    """<Psi_A|Psi_B> for active-space statevectors at two geometries.

    ``s_cross_ao`` is the AO overlap <mu(A)|nu(B)>; the frozen core is
    included in every determinant pair.
    """
    part = ints_a.partition
    S = ints_a.C.T @ s_cross_ao @ ints_b.C
    amps_a = state_a.amplitudes
    amps_b = state_b.amplitudes
    nq = state_a.n_qubits
    nz_a = [b for b in range(len(amps_a)) if abs(amps_a[b]) > 1e-12]
    nz_b = [b for b in range(len(amps_b)) if abs(amps_b[b]) > 1e-12]
    occ_a = {b: occupied_spinorbitals(b, nq, part) for b in nz_a}
    occ_b = {b: occupied_spinorbitals(b, nq, part) for b in nz_b}
    total = 0.0
    for ba in nz_a:
        for bb in nz_b:
            oa, ob = occ_a[ba], occ_b[bb]
            M = np.zeros((len(oa), len(ob)))
            for i, (pa, sa) in enumerate(oa):
                for j, (pb, sb) in enumerate(ob):
                    if sa == sb:
                        M[i, j] = S[pa, pb]
            total += (amps_a[ba].real * amps_b[bb].real * np.linalg.det(M))
    return float(total)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def central_difference(fun, x0: np.ndarray, coord: int, eps: float) -> float:
    dp = np.zeros_like(np.asarray(x0, dtype=float))
    dp[coord] = eps
    return (fun(x0 + dp) - fun(x0 - dp)) / (2.0 * eps)


def richardson_difference(fun, x0, coord, eps: float) -> float:
    d1 = central_difference(fun, x0, coord, eps)
    d2 = central_difference(fun, x0, coord, 0.5 * eps)
    return (4.0 * d2 - d1) / 3.0
