"""Orbital optimization: Fock matrices, gradient, Hessian, Newton steps.

Orbital rotations use the antisymmetric parametrization kappa_pq (p > q)
with the energy E(kappa) = <exp(kappa_hat) H exp(-kappa_hat)>; the MO
update is C' = C @ expm(-kappa_matrix).  Commutators with the rotation
generators are evaluated through one-index-transformed integrals, which
sidesteps any ambiguity in closed-form Hessian expressions; the finite
difference oracle in the test suite is the authority for both gradient
and Hessian.

Redundant-pair policy: frozen-frozen and virtual-virtual pairs are always
masked; active-active pairs are masked by default (the doubles ansatz
makes them gauge directions at CASCI-exact active spaces) with a flag to
unmask for truncated-ansatz experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .integrals import OrbitalPartition, frozen_fock


# ---------------------------------------------------------------------------
# pair bookkeeping
# ---------------------------------------------------------------------------

def nonredundant_pairs(partition: OrbitalPartition,
                       include_active_active: bool = False
                       ) -> tuple[tuple[int, int], ...]:
    """Rotation pairs (p, q), p > q, kept in the optimization."""
    space = {}
    for i in partition.frozen:
        space[i] = "f"
    for v in partition.active:
        space[v] = "a"
    for a in partition.virtual:
        space[a] = "v"
    pairs = []
    for p in range(partition.n_orb):
        for q in range(p):
            kinds = {space[p], space[q]}
            if kinds in ({"f"}, {"v"}):
                continue
            if kinds == {"a"} and not include_active_active:
                continue
            pairs.append((p, q))
    return tuple(pairs)


def kappa_matrix(pairs, kappa_vec, n_orb: int) -> np.ndarray:
    K = np.zeros((n_orb, n_orb))
    for (p, q), k in zip(pairs, kappa_vec):
        K[p, q] = k
        K[q, p] = -k
    return K


@dataclass
class OrbitalRotation:
    """Antisymmetric rotation parameters over the non-redundant pairs."""

    pairs: tuple[tuple[int, int], ...]
    kappa: np.ndarray
    n_orb: int

    def matrix(self) -> np.ndarray:
        return kappa_matrix(self.pairs, self.kappa, self.n_orb)


def rotate_orbitals(C: np.ndarray, rotation: OrbitalRotation) -> np.ndarray:
    """C' = C exp(-kappa); exact orthogonal map, preserves C^T S C = 1."""
    return C @ scipy.linalg.expm(-rotation.matrix())


# ---------------------------------------------------------------------------
# RDM completion over frozen space
# ---------------------------------------------------------------------------

def complete_rdms(gamma_act: np.ndarray, Gamma_act: np.ndarray,
                  partition: OrbitalPartition, overlap: float = 1.0
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Embed active-space (transition) RDMs into the full MO space.

    ``overlap`` is <Psi_I|Psi_J>: 1 for ordinary RDMs, 0 for transition
    RDMs between orthogonal states; it scales the closed-shell frozen
    blocks.  Virtual blocks vanish.
    """
    n = partition.n_orb
    act = list(partition.active)
    frz = list(partition.frozen)
    gamma = np.zeros((n, n))
    Gamma = np.zeros((n,) * 4)
    gamma[np.ix_(act, act)] = gamma_act
    for i in frz:
        gamma[i, i] = 2.0 * overlap
    Gamma[np.ix_(act, act, act, act)] = Gamma_act
    for i in frz:
        for j in frz:
            Gamma[i, i, j, j] += 4.0 * overlap
            Gamma[i, j, j, i] += -2.0 * overlap
    for i in frz:
        for wi, w in enumerate(act):
            for xi, x in enumerate(act):
                val = gamma_act[wi, xi]
                Gamma[i, i, w, x] = 2.0 * val
                Gamma[w, x, i, i] = 2.0 * val
                # e_{i w x i} contracts to -gamma_{xw}
                Gamma[i, w, x, i] = -gamma_act[xi, wi]
                Gamma[x, i, i, w] = -gamma_act[xi, wi]
    return gamma, Gamma


def contract_energy(h: np.ndarray, g: np.ndarray, gamma: np.ndarray,
                    Gamma: np.ndarray) -> float:
    """sum h*gamma + 1/2 sum g*Gamma (electronic part only)."""
    return float(np.einsum("pq,pq->", h, gamma)
                 + 0.5 * np.einsum("pqrs,pqrs->", g, Gamma))


# ---------------------------------------------------------------------------
# one-index transformation: [kappa_hat, H] as transformed integrals
# ---------------------------------------------------------------------------

def one_index_transform(h: np.ndarray, g: np.ndarray, K: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Integrals of [kappa_hat, H] for antisymmetric K.

    h~_pq = sum_o (K_po h_oq + K_qo h_po); the two-electron part applies
    the same pattern to each of the four indices.
    """
    h1 = K @ h + (K @ h.T).T  # K_po h_oq + h_po K_qo^T with K antisymmetric
    g1 = (np.einsum("po,oqrs->pqrs", K, g, optimize=True)
          + np.einsum("qo,pors->pqrs", K, g, optimize=True)
          + np.einsum("ro,pqos->pqrs", K, g, optimize=True)
          + np.einsum("so,pqro->pqrs", K, g, optimize=True))
    return h1, g1


def _unit_pair_matrix(p: int, q: int, n: int) -> np.ndarray:
    K = np.zeros((n, n))
    K[p, q] = 1.0
    K[q, p] = -1.0
    return K


# ---------------------------------------------------------------------------
# generalized Fock matrices
# ---------------------------------------------------------------------------

@dataclass
class FockMatrices:
    """Generalized Fock matrix plus its frozen/active ingredients."""

    general: np.ndarray
    frozen: np.ndarray
    active: np.ndarray


def active_fock(g_mo: np.ndarray, gamma_act: np.ndarray,
                active: tuple[int, ...]) -> np.ndarray:
    """F^active_pq = sum_{w,x} gamma_wx (g_pqwx - 1/2 g_pxwq)."""
    act = list(active)
    g_pqwx = g_mo[:, :, act, :][:, :, :, act]
    g_pxwq = g_mo[:, act, :, :][:, :, act, :]
    direct = np.einsum("wx,pqwx->pq", gamma_act, g_pqwx, optimize=True)
    exch = np.einsum("wx,pxwq->pq", gamma_act, g_pxwq, optimize=True)
    return direct - 0.5 * exch


def generalized_fock(gamma_act: np.ndarray, Gamma_act: np.ndarray,
                     h_mo: np.ndarray, g_mo: np.ndarray,
                     partition: OrbitalPartition) -> FockMatrices:
    """Partitioned generalized Fock matrix.

    Rows: frozen i: F_iq = 2(F^frozen_qi + F^active_qi); active v:
    F_vq = sum_w F^frozen_qw gamma_vw + sum_wxy Gamma_vwxy g_qwxy;
    virtual rows vanish.
    """
    n = partition.n_orb
    act = list(partition.active)
    Ffr = frozen_fock(h_mo, g_mo, partition.frozen)
    Fac = active_fock(g_mo, gamma_act, partition.active)
    F = np.zeros((n, n))
    for i in partition.frozen:
        F[i, :] = 2.0 * (Ffr[:, i] + Fac[:, i])
    if act:
        gsub = g_mo[np.ix_(range(n), act, act, act)]
        two = np.einsum("vwxy,qwxy->vq", Gamma_act, gsub, optimize=True)
        one = gamma_act @ Ffr[:, act].T
        for vi, v in enumerate(act):
            F[v, :] = one[vi, :] + two[vi, :]
    return FockMatrices(general=F, frozen=Ffr, active=Fac)


def generalized_fock_full(gamma_full: np.ndarray, Gamma_full: np.ndarray,
                          h_mo: np.ndarray, g_mo: np.ndarray) -> np.ndarray:
    """Unpartitioned definition F_pq = sum_t gamma_pt h_qt
    + sum_tuv Gamma_ptuv g_qtuv; used for cross-checks and transition RDMs."""
    return (np.einsum("pt,qt->pq", gamma_full, h_mo, optimize=True)
            + np.einsum("ptuv,qtuv->pq", Gamma_full, g_mo, optimize=True))


# ---------------------------------------------------------------------------
# gradient and Hessian
# ---------------------------------------------------------------------------

def orbital_gradient(F: np.ndarray, pairs) -> np.ndarray:
    """G^O_pq = 2(F_pq - F_qp) restricted to the given pairs."""
    G = 2.0 * (F - F.T)
    return np.array([G[p, q] for p, q in pairs])


def orbital_gradient_matrix(F: np.ndarray) -> np.ndarray:
    return 2.0 * (F - F.T)


def orbital_hessian(gamma_full: np.ndarray, Gamma_full: np.ndarray,
                    h_mo: np.ndarray, g_mo: np.ndarray, pairs) -> np.ndarray:
    """H^OO over pair indices via nested one-index transforms.

    H_{pq,rs} = 1/2 (1 + S_{(pq)}^{(rs)}) <[E-_pq, [E-_rs, H]]> with the
    expectation taken in the state whose full-space RDMs are supplied
    (state-averaged RDMs for the SA Hessian).
    """
    n = h_mo.shape[0]
    npair = len(pairs)
    raw = np.zeros((npair, npair))
    transformed = []
    for (r, s) in pairs:
        transformed.append(one_index_transform(h_mo, g_mo,
                                               _unit_pair_matrix(r, s, n)))
    for b, (h1, g1) in enumerate(transformed):
        for a, (p, q) in enumerate(pairs):
            h2, g2 = one_index_transform(h1, g1, _unit_pair_matrix(p, q, n))
            raw[a, b] = contract_energy(h2, g2, gamma_full, Gamma_full)
    return 0.5 * (raw + raw.T)


def sa_orbital_gradient_vector(gamma_full, Gamma_full, h_mo, g_mo, pairs
                               ) -> np.ndarray:
    """<[E-_pq, H]> over pairs from full-space RDMs (commutator route)."""
    n = h_mo.shape[0]
    out = np.zeros(len(pairs))
    for a, (p, q) in enumerate(pairs):
        h1, g1 = one_index_transform(h_mo, g_mo, _unit_pair_matrix(p, q, n))
        out[a] = contract_energy(h1, g1, gamma_full, Gamma_full)
    return out


# ---------------------------------------------------------------------------
# Newton step
# ---------------------------------------------------------------------------

@dataclass
class NewtonStepResult:
    rotation: OrbitalRotation
    level_shift: float
    singular: bool


def newton_step(gradient: np.ndarray, hessian: np.ndarray, pairs,
                n_orb: int, pd_floor: float = 1e-10,
                shift_margin: float = 1e-6) -> NewtonStepResult:
    """Solve (H + lambda 1) kappa = -G with the smallest non-negative level
    shift rendering the system positive definite (lambda = 0 when it
    already is).  A numerically singular shifted system falls back to a
    least-squares solve and sets the ``singular`` flag.
    """
    if len(pairs) == 0:
        return NewtonStepResult(OrbitalRotation((), np.zeros(0), n_orb),
                                0.0, False)
    evals = np.linalg.eigvalsh(hessian)
    lam = 0.0
    if evals[0] <= pd_floor:
        lam = -evals[0] + shift_margin
    A = hessian + lam * np.eye(len(pairs))
    singular = False
    try:
        kappa = np.linalg.solve(A, -gradient)
        if not np.all(np.isfinite(kappa)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        kappa, *_ = np.linalg.lstsq(A, -gradient, rcond=None)
        singular = True
    return NewtonStepResult(OrbitalRotation(tuple(pairs), kappa, n_orb),
                            lam, singular)
