"""Hot numeric kernels for the statevector simulator.

Two interchangeable backends are provided: numba ``@njit`` kernels and a
pure-numpy fallback.  The backend is selected once at import time from the
environment variable ``OOVQE_KERNELS`` ("numba" or "numpy").  Default is
numba when importable, numpy otherwise.  ``benchmarks/bench_kernels.py``
compares the two.

All kernels operate on a contiguous complex128 amplitude array of length
2**n_qubits.  Pauli strings are packed as two integer bit masks: ``x_mask``
(qubits carrying X or Y) and ``z_mask`` (qubits carrying Z or Y).  Qubit q
maps to bit position (n_qubits - 1 - q), so qubit 0 is the most significant
bit and ket labels |q0 q1 ...> read left to right.
"""

from __future__ import annotations

import os

import numpy as np

_REQUESTED = os.environ.get("OOVQE_KERNELS", "").strip().lower()

if _REQUESTED not in ("", "numba", "numpy"):
    raise ValueError(
        f"OOVQE_KERNELS must be 'numba' or 'numpy', got {_REQUESTED!r}"
    )

_HAVE_NUMBA = False
if _REQUESTED in ("", "numba"):
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _REQUESTED == "numba":
            raise

BACKEND = "numba" if _HAVE_NUMBA else "numpy"

# i**k lookup used when assembling Pauli phases.
_I_POW = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])


# ---------------------------------------------------------------------------
# numpy fallback implementations
# ---------------------------------------------------------------------------

def _np_pauli_phases(dim: int, z_mask: int, i_pow: int) -> np.ndarray:
    b = np.arange(dim, dtype=np.uint64)
    signs = 1.0 - 2.0 * (np.bitwise_count(b & np.uint64(z_mask)) & 1).astype(float)
    return _I_POW[i_pow & 3] * signs


def _np_apply_pauli(amps, x_mask, z_mask, i_pow):
    dim = amps.shape[0]
    phases = _np_pauli_phases(dim, z_mask, i_pow)
    src = np.arange(dim) ^ x_mask
    return phases[src] * amps[src]


def _np_apply_pauli_exp(amps, x_mask, z_mask, i_pow, angle):
    # exp(-i*angle/2 * P)|psi> = cos(angle/2)|psi> - i sin(angle/2) P|psi>
    c = np.cos(0.5 * angle)
    s = np.sin(0.5 * angle)
    return c * amps - 1.0j * s * _np_apply_pauli(amps, x_mask, z_mask, i_pow)


def _np_expectation_terms(amps, x_masks, z_masks, i_pows, coeffs):
    total = 0.0 + 0.0j
    for x, z, k, c in zip(x_masks, z_masks, i_pows, coeffs):
        total += c * np.vdot(amps, _np_apply_pauli(amps, int(x), int(z), int(k)))
    return total


def _np_transition_terms(bra, ket, x_masks, z_masks, i_pows, coeffs):
    total = 0.0 + 0.0j
    for x, z, k, c in zip(x_masks, z_masks, i_pows, coeffs):
        total += c * np.vdot(bra, _np_apply_pauli(ket, int(x), int(z), int(k)))
    return total


def _np_apply_1q_gate(amps, u00, u01, u10, u11, target_bit, control_mask):
    dim = amps.shape[0]
    b = np.arange(dim)
    sel = (b & target_bit) == 0
    if control_mask:
        sel &= (b & control_mask) == control_mask
    lo = b[sel]
    hi = lo | target_bit
    a_lo = amps[lo].copy()
    a_hi = amps[hi].copy()
    out = amps.copy()
    out[lo] = u00 * a_lo + u01 * a_hi
    out[hi] = u10 * a_lo + u11 * a_hi
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _popcount(v):
        count = 0
        while v:
            v &= v - 1
            count += 1
        return count

    @njit(cache=True)
    def _nb_apply_pauli_exp(amps, x_mask, z_mask, i_pow, angle):
        dim = amps.shape[0]
        c = np.cos(0.5 * angle)
        s = np.sin(0.5 * angle)
        ip = 1.0 + 0.0j
        for _ in range(i_pow & 3):
            ip *= 1.0j
        out = amps  # in-place update over disjoint index pairs
        if x_mask == 0:
            for b in range(dim):
                sign = -1.0 if (_popcount(b & z_mask) & 1) else 1.0
                out[b] = (c - 1.0j * s * ip * sign) * amps[b]
            return out
        for b in range(dim):
            bx = b ^ x_mask
            if bx < b:
                continue
            sign_b = -1.0 if (_popcount(b & z_mask) & 1) else 1.0
            sign_bx = -1.0 if (_popcount(bx & z_mask) & 1) else 1.0
            ab = amps[b]
            abx = amps[bx]
            # (P psi)[b] = phase(b^x) psi[b^x]
            out[b] = c * ab - 1.0j * s * ip * sign_bx * abx
            out[bx] = c * abx - 1.0j * s * ip * sign_b * ab
        return out

    @njit(cache=True)
    def _nb_expectation_terms(amps, x_masks, z_masks, i_pows, coeffs):
        dim = amps.shape[0]
        total = 0.0 + 0.0j
        for t in range(x_masks.shape[0]):
            x = x_masks[t]
            z = z_masks[t]
            ip = 1.0 + 0.0j
            for _ in range(i_pows[t] & 3):
                ip *= 1.0j
            acc = 0.0 + 0.0j
            for b in range(dim):
                sign = -1.0 if (_popcount(b & z) & 1) else 1.0
                acc += np.conj(amps[b ^ x]) * sign * amps[b]
            total += coeffs[t] * ip * acc
        return total

    @njit(cache=True)
    def _nb_transition_terms(bra, ket, x_masks, z_masks, i_pows, coeffs):
        dim = ket.shape[0]
        total = 0.0 + 0.0j
        for t in range(x_masks.shape[0]):
            x = x_masks[t]
            z = z_masks[t]
            ip = 1.0 + 0.0j
            for _ in range(i_pows[t] & 3):
                ip *= 1.0j
            acc = 0.0 + 0.0j
            for b in range(dim):
                sign = -1.0 if (_popcount(b & z) & 1) else 1.0
                acc += np.conj(bra[b ^ x]) * sign * ket[b]
            total += coeffs[t] * ip * acc
        return total

    @njit(cache=True)
    def _nb_apply_pauli(amps, out, x_mask, z_mask, i_pow):
        dim = amps.shape[0]
        ip = 1.0 + 0.0j
        for _ in range(i_pow & 3):
            ip *= 1.0j
        for b in range(dim):
            bx = b ^ x_mask
            sign = -1.0 if (_popcount(bx & z_mask) & 1) else 1.0
            out[b] = ip * sign * amps[bx]
        return out

    @njit(cache=True)
    def _nb_apply_pauli_exp_sequence(amps, x_masks, z_masks, i_pows, angles):
        for t in range(x_masks.shape[0]):
            _nb_apply_pauli_exp(amps, x_masks[t], z_masks[t], i_pows[t],
                                angles[t])
        return amps

    @njit(cache=True)
    def _nb_apply_1q_gate(amps, u00, u01, u10, u11, target_bit, control_mask):
        dim = amps.shape[0]
        for b in range(dim):
            if b & target_bit:
                continue
            if (b & control_mask) != control_mask:
                continue
            hi = b | target_bit
            a_lo = amps[b]
            a_hi = amps[hi]
            amps[b] = u00 * a_lo + u01 * a_hi
            amps[hi] = u10 * a_lo + u11 * a_hi
        return amps


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------

def apply_pauli_exp(amps: np.ndarray, x_mask: int, z_mask: int, i_pow: int,
                    angle: float) -> np.ndarray:
    """Apply exp(-i*angle/2 * P) in place; returns the (mutated) array."""
    if BACKEND == "numba":
        return _nb_apply_pauli_exp(amps, x_mask, z_mask, i_pow, angle)
    amps[:] = _np_apply_pauli_exp(amps, x_mask, z_mask, i_pow, angle)
    return amps


def apply_pauli(amps: np.ndarray, x_mask: int, z_mask: int,
                i_pow: int) -> np.ndarray:
    """P|psi> into a fresh array."""
    if BACKEND == "numba":
        out = np.empty_like(amps)
        return _nb_apply_pauli(amps, out, x_mask, z_mask, i_pow)
    return _np_apply_pauli(amps, x_mask, z_mask, i_pow)


def apply_paulisum(amps: np.ndarray, x_masks, z_masks, i_pows,
                   coeffs) -> np.ndarray:
    """(sum_t c_t P_t)|psi> into a fresh array."""
    out = np.zeros_like(amps)
    for t in range(len(x_masks)):
        out += coeffs[t] * apply_pauli(amps, int(x_masks[t]),
                                       int(z_masks[t]), int(i_pows[t]))
    return out


def apply_pauli_exp_sequence(amps: np.ndarray, x_masks, z_masks, i_pows,
                             angles) -> np.ndarray:
    """Apply a whole sequence of Pauli exponentials in place (circuit body)."""
    if BACKEND == "numba":
        return _nb_apply_pauli_exp_sequence(amps, x_masks, z_masks, i_pows,
                                            angles)
    for t in range(len(x_masks)):
        amps[:] = _np_apply_pauli_exp(amps, int(x_masks[t]), int(z_masks[t]),
                                      int(i_pows[t]), float(angles[t]))
    return amps


def expectation_terms(amps, x_masks, z_masks, i_pows, coeffs) -> complex:
    """<psi| sum_t c_t P_t |psi> for packed Pauli term arrays."""
    if BACKEND == "numba":
        return _nb_expectation_terms(amps, x_masks, z_masks, i_pows, coeffs)
    return _np_expectation_terms(amps, x_masks, z_masks, i_pows, coeffs)


def transition_terms(bra, ket, x_masks, z_masks, i_pows, coeffs) -> complex:
    """<bra| sum_t c_t P_t |ket>."""
    if BACKEND == "numba":
        return _nb_transition_terms(bra, ket, x_masks, z_masks, i_pows, coeffs)
    return _np_transition_terms(bra, ket, x_masks, z_masks, i_pows, coeffs)


def apply_1q_gate(amps, u: np.ndarray, target_bit: int,
                  control_mask: int) -> np.ndarray:
    """Apply a 2x2 matrix on one qubit, optionally controlled, in place.

    ``control_mask`` holds the bit positions that must all be 1.
    """
    u00, u01, u10, u11 = (complex(u[0, 0]), complex(u[0, 1]),
                          complex(u[1, 0]), complex(u[1, 1]))
    if BACKEND == "numba":
        return _nb_apply_1q_gate(amps, u00, u01, u10, u11, target_bit,
                                 control_mask)
    amps[:] = _np_apply_1q_gate(amps, u00, u01, u10, u11, target_bit,
                                control_mask)
    return amps
