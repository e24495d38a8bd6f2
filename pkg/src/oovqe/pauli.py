"""Pauli-string and Pauli-sum algebra.

A :class:`PauliString` is a tensor product of single-qubit Pauli letters
(I, X, Y, Z), one per qubit.  Its matrix convention is the plain Kronecker
product of the standard Pauli matrices with qubit 0 as the leftmost (most
significant) factor.  A :class:`PauliSum` is a canonically combined weighted
sum of such strings: no two terms share a string, and near-zero coefficients
are dropped.

Internally a string is packed as two bit masks over qubit positions,
``x_mask`` (X or Y) and ``z_mask`` (Z or Y), with the identity
``P = i**|x&z| * X^x * Z^z``.  Qubit q occupies bit (n_qubits - 1 - q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LETTER_TO_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_XZ_TO_LETTER = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

COEFF_TOL = 1e-14


def _bit(n_qubits: int, qubit: int) -> int:
    return 1 << (n_qubits - 1 - qubit)


@dataclass(frozen=True)
class PauliString:
    """Immutable Pauli string on ``n_qubits`` qubits."""

    n_qubits: int
    x_mask: int
    z_mask: int

    @classmethod
    def from_label(cls, ops: str) -> "PauliString":
        """Build from a letter string like ``"XIZY"`` (qubit 0 first)."""
        n = len(ops)
        x = z = 0
        for q, letter in enumerate(ops):
            try:
                xb, zb = _LETTER_TO_XZ[letter]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {letter!r}") from None
            if xb:
                x |= _bit(n, q)
            if zb:
                z |= _bit(n, q)
        return cls(n, x, z)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @property
    def ops(self) -> str:
        letters = []
        for q in range(self.n_qubits):
            b = _bit(self.n_qubits, q)
            letters.append(_XZ_TO_LETTER[(int(bool(self.x_mask & b)),
                                          int(bool(self.z_mask & b)))])
        return "".join(letters)

    @property
    def n_y(self) -> int:
        return int(self.x_mask & self.z_mask).bit_count()

    def weight(self) -> int:
        """Number of non-identity letters."""
        return int(self.x_mask | self.z_mask).bit_count()

    def letter(self, qubit: int) -> str:
        b = _bit(self.n_qubits, qubit)
        return _XZ_TO_LETTER[(int(bool(self.x_mask & b)),
                              int(bool(self.z_mask & b)))]

    def commutes_with(self, other: "PauliString") -> bool:
        """True when the two strings commute as operators."""
        anti = (int(self.x_mask & other.z_mask).bit_count()
                + int(self.z_mask & other.x_mask).bit_count())
        return anti % 2 == 0

    def multiply(self, other: "PauliString") -> tuple[complex, "PauliString"]:
        """Return (phase, string) with self @ other = phase * string."""
        if self.n_qubits != other.n_qubits:
            raise ValueError("qubit-count mismatch in Pauli multiplication")
        x3 = self.x_mask ^ other.x_mask
        z3 = self.z_mask ^ other.z_mask
        ipow = (self.n_y + other.n_y - int(x3 & z3).bit_count()) % 4
        sign = -1.0 if int(self.z_mask & other.x_mask).bit_count() % 2 else 1.0
        phase = sign * (1.0j ** ipow)
        return phase, PauliString(self.n_qubits, x3, z3)

    def to_matrix(self) -> np.ndarray:
        m = np.array([[1.0 + 0.0j]])
        for letter in self.ops:
            m = np.kron(m, _PAULI_MATS[letter])
        return m

    def __repr__(self) -> str:  # pragma: no cover
        return f"PauliString('{self.ops}')"


class PauliSum:
    """Canonically combined weighted sum of Pauli strings.

    Terms live in a dict keyed by (x_mask, z_mask); coefficients below
    ``COEFF_TOL`` (relative to the largest coefficient) are pruned.  The
    packed term arrays consumed by the kernels are built lazily and cached.
    """

    __slots__ = ("n_qubits", "_terms", "_packed")

    def __init__(self, n_qubits: int,
                 terms: dict[tuple[int, int], complex] | None = None):
        self.n_qubits = n_qubits
        self._terms: dict[tuple[int, int], complex] = dict(terms or {})
        self._packed = None
        self._prune()

    # -- construction -----------------------------------------------------

    @classmethod
    def from_terms(cls, terms: list[tuple[complex, PauliString]]) -> "PauliSum":
        if not terms:
            raise ValueError("empty term list; use PauliSum.zero(n_qubits)")
        n = terms[0][1].n_qubits
        acc: dict[tuple[int, int], complex] = {}
        for coeff, string in terms:
            if string.n_qubits != n:
                raise ValueError("mixed qubit counts in PauliSum terms")
            key = (string.x_mask, string.z_mask)
            acc[key] = acc.get(key, 0.0) + complex(coeff)
        return cls(n, acc)

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits, {})

    @classmethod
    def scalar(cls, n_qubits: int, value: complex) -> "PauliSum":
        return cls(n_qubits, {(0, 0): complex(value)})

    def _prune(self) -> None:
        if not self._terms:
            return
        scale = max(abs(c) for c in self._terms.values())
        if scale == 0.0:
            self._terms = {}
            return
        tol = COEFF_TOL * max(scale, 1.0)
        self._terms = {k: c for k, c in self._terms.items() if abs(c) > tol}

    # -- inspection --------------------------------------------------------

    @property
    def terms(self) -> list[tuple[complex, PauliString]]:
        return [(c, PauliString(self.n_qubits, x, z))
                for (x, z), c in sorted(self._terms.items())]

    @property
    def n_terms(self) -> int:
        return len(self._terms)

    def coefficient(self, string: PauliString) -> complex:
        return self._terms.get((string.x_mask, string.z_mask), 0.0 + 0.0j)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        # Pauli strings are Hermitian and linearly independent, so
        # hermiticity is equivalent to real coefficients.
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def packed(self):
        """Packed (x_masks, z_masks, i_pows, coeffs) arrays for the kernels."""
        if self._packed is None:
            items = sorted(self._terms.items())
            xs = np.array([k[0] for k, _ in items], dtype=np.int64)
            zs = np.array([k[1] for k, _ in items], dtype=np.int64)
            ip = np.array([int(k[0] & k[1]).bit_count() % 4 for k, _ in items],
                          dtype=np.int64)
            cs = np.array([c for _, c in items], dtype=np.complex128)
            self._packed = (xs, zs, ip, cs)
        return self._packed

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n_qubits != other.n_qubits:
            raise ValueError("qubit-count mismatch in PauliSum addition")
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0.0) + c
        return PauliSum(self.n_qubits, acc)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (other * -1.0)

    def __mul__(self, scalar: complex) -> "PauliSum":
        return PauliSum(self.n_qubits,
                        {k: c * scalar for k, c in self._terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        if self.n_qubits != other.n_qubits:
            raise ValueError("qubit-count mismatch in PauliSum product")
        acc: dict[tuple[int, int], complex] = {}
        for (x1, z1), c1 in self._terms.items():
            p1 = PauliString(self.n_qubits, x1, z1)
            for (x2, z2), c2 in other._terms.items():
                phase, p3 = p1.multiply(PauliString(self.n_qubits, x2, z2))
                key = (p3.x_mask, p3.z_mask)
                acc[key] = acc.get(key, 0.0) + c1 * c2 * phase
        return PauliSum(self.n_qubits, acc)

    def dagger(self) -> "PauliSum":
        return PauliSum(self.n_qubits,
                        {k: c.conjugate() for k, c in self._terms.items()})

    def commutator(self, other: "PauliSum") -> "PauliSum":
        return (self @ other) - (other @ self)

    def to_matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        m = np.zeros((dim, dim), dtype=complex)
        for coeff, string in self.terms:
            m += coeff * string.to_matrix()
        return m

    def __repr__(self) -> str:  # pragma: no cover
        parts = [f"({c:.6g})*{s.ops}" for c, s in self.terms[:4]]
        more = "" if self.n_terms <= 4 else f" ... ({self.n_terms} terms)"
        return f"PauliSum[{' + '.join(parts)}{more}]"
