"""Electronic-integral containers, file formats and basis transforms.

Two-electron integrals are stored in chemists' notation (pq|rs) with full
8-fold real symmetry throughout.  The DERIVDUMP format stores the
half-derivative overlap T^(x)_{mu,nu} = (d_x mu | nu); the symmetric
S^(x) = T + T^T is derived from it.  Both formats are specified in
docs/formats.md; unspecified elements default to zero, duplicate entries
with equal values are tolerated and contradictory ones rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .fermion import ActiveHamiltonian

_DUP_TOL = 1e-10


class FormatError(ValueError):
    """Malformed FCIDUMP / DERIVDUMP input."""


@dataclass(frozen=True)
class OrbitalPartition:
    """Disjoint frozen/active/virtual split covering all molecular orbitals."""

    frozen: tuple[int, ...]
    active: tuple[int, ...]
    virtual: tuple[int, ...]

    def __post_init__(self):
        allidx = list(self.frozen) + list(self.active) + list(self.virtual)
        if sorted(allidx) != list(range(len(allidx))):
            raise ValueError("partition must be disjoint and cover all MOs")

    @property
    def n_orb(self) -> int:
        return len(self.frozen) + len(self.active) + len(self.virtual)

    @classmethod
    def cas(cls, n_orb: int, n_frozen: int, n_active: int) -> "OrbitalPartition":
        return cls(tuple(range(n_frozen)),
                   tuple(range(n_frozen, n_frozen + n_active)),
                   tuple(range(n_frozen + n_active, n_orb)))


@dataclass
class IntegralSet:
    """AO integrals, MO coefficients and the orbital-space partition.

    The MO coefficient matrix C is column-per-orbital over AOs and is
    mutated in place by the orbital optimizer; downstream consumers rebuild
    MO-basis quantities after each rotation.
    """

    S_ao: np.ndarray
    h_ao: np.ndarray
    g_ao: np.ndarray
    C: np.ndarray
    e_nuc: float
    n_elec: int
    partition: OrbitalPartition

    def __post_init__(self):
        self.S_ao = np.asarray(self.S_ao, dtype=float)
        self.h_ao = np.asarray(self.h_ao, dtype=float)
        self.g_ao = np.asarray(self.g_ao, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        n = self.S_ao.shape[0]
        if self.h_ao.shape != (n, n) or self.g_ao.shape != (n,) * 4:
            raise ValueError("AO integral shapes inconsistent")
        if self.C.shape != (n, self.partition.n_orb):
            raise ValueError("C shape inconsistent with partition")
        np.linalg.cholesky(self.S_ao)  # raises unless S is SPD
        self.check_orthonormal()

    def check_orthonormal(self, tol: float = 1e-10) -> None:
        ortho = self.C.T @ self.S_ao @ self.C
        if np.abs(ortho - np.eye(self.C.shape[1])).max() > tol:
            raise ValueError("MO coefficients are not S-orthonormal")

    @property
    def n_ao(self) -> int:
        return self.S_ao.shape[0]

    def copy(self) -> "IntegralSet":
        return IntegralSet(self.S_ao.copy(), self.h_ao.copy(),
                           self.g_ao.copy(), self.C.copy(), self.e_nuc,
                           self.n_elec, self.partition)


@dataclass
class DerivativeIntegralSet:
    """Nuclear-derivative AO integrals, one entry per coordinate.

    ``T_half[k]`` holds (d_k mu | nu) without any symmetry; the symmetric
    overlap derivative is ``T_half + T_half^T``.  ``g_x_ao`` carries the
    8-fold symmetry of a full derivative (the coordinate differentiates
    all four indices jointly).
    """

    labels: tuple[str, ...]
    T_half: np.ndarray      # (n_coords, n_ao, n_ao)
    h_x_ao: np.ndarray
    g_x_ao: np.ndarray      # (n_coords, n_ao, n_ao, n_ao, n_ao)
    de_nuc: np.ndarray      # (n_coords,)

    def __post_init__(self):
        self.T_half = np.asarray(self.T_half, dtype=float)
        self.h_x_ao = np.asarray(self.h_x_ao, dtype=float)
        self.g_x_ao = np.asarray(self.g_x_ao, dtype=float)
        self.de_nuc = np.asarray(self.de_nuc, dtype=float)

    @property
    def n_coords(self) -> int:
        return len(self.labels)

    @property
    def n_ao(self) -> int:
        return self.T_half.shape[1]

    def s_x(self, k: int) -> np.ndarray:
        return self.T_half[k] + self.T_half[k].T


# ---------------------------------------------------------------------------
# 8-fold symmetry helpers
# ---------------------------------------------------------------------------

def _g_images(i, j, k, l):
    return {(i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
            (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)}


def _set_g(g, i, j, k, l, value, what):
    for idx in _g_images(i, j, k, l):
        old = g[idx]
        if old != 0.0 and abs(old - value) > _DUP_TOL:
            raise FormatError(
                f"contradictory duplicate {what} entry at {idx}: "
                f"{old!r} vs {value!r}")
        g[idx] = value


def _set_sym(h, i, j, value, what):
    for idx in ((i, j), (j, i)):
        old = h[idx]
        if old != 0.0 and abs(old - value) > _DUP_TOL:
            raise FormatError(
                f"contradictory duplicate {what} entry at {idx}: "
                f"{old!r} vs {value!r}")
        h[idx] = value


# ---------------------------------------------------------------------------
# FCIDUMP
# ---------------------------------------------------------------------------

_NAMELIST_RE = re.compile(r"([A-Za-z0-9_]+)\s*=\s*([-0-9]+)")


def parse_fcidump(path) -> tuple[np.ndarray, np.ndarray, float, int, int]:
    """Read an FCIDUMP file.

    Returns (h, g, e_core, n_orb, n_elec) with 0-based symmetric h and
    8-fold-symmetric g reconstructed from the stored unique elements.
    """
    with open(path) as f:
        text = f.read()
    m = re.search(r"&FCI(.*?)(?:&END|/)", text, re.S | re.I)
    if not m:
        raise FormatError("missing &FCI ... &END namelist header")
    fields = dict((k.upper(), int(v)) for k, v in _NAMELIST_RE.findall(m.group(1)))
    if "NORB" not in fields or "NELEC" not in fields:
        raise FormatError("FCIDUMP header must declare NORB and NELEC")
    n_orb = fields["NORB"]
    n_elec = fields["NELEC"]
    if n_orb <= 0:
        raise FormatError(f"invalid NORB={n_orb}")
    h = np.zeros((n_orb, n_orb))
    g = np.zeros((n_orb,) * 4)
    e_core = 0.0
    body = text[text.index(m.group(0)) + len(m.group(0)):]
    for line in body.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise FormatError(f"malformed FCIDUMP data line: {line!r}")
        value = float(parts[0])
        i, j, k, l = (int(p) for p in parts[1:])
        for idx in (i, j, k, l):
            if idx < 0 or idx > n_orb:
                raise FormatError(f"index {idx} outside 1..{n_orb}: {line!r}")
        if i == j == k == l == 0:
            e_core = value
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise FormatError(f"invalid one-electron indices: {line!r}")
            _set_sym(h, i - 1, j - 1, value, "h")
        elif 0 in (i, j, k, l):
            raise FormatError(f"invalid mixed zero indices: {line!r}")
        else:
            _set_g(g, i - 1, j - 1, k - 1, l - 1, value, "g")
    return h, g, e_core, n_orb, n_elec


def write_fcidump(path, h: np.ndarray, g: np.ndarray, e_core: float,
                  n_elec: int, ms2: int = 0, tol: float = 0.0) -> None:
    """Write unique nonzero elements in FCIDUMP layout (17 significant digits)."""
    n = h.shape[0]
    fmt = "%.17g %4d %4d %4d %4d\n"
    with open(path, "w") as f:
        f.write(f" &FCI NORB={n},NELEC={n_elec},MS2={ms2},\n")
        f.write("  ORBSYM=" + "1," * n + "\n")
        f.write("  ISYM=1,\n")
        f.write(" &END\n")
        written = set()
        for i in range(n):
            for j in range(i + 1):
                for k in range(n):
                    for l in range(k + 1):
                        key = min(_g_images(i, j, k, l))
                        if key in written:
                            continue
                        written.add(key)
                        if abs(g[i, j, k, l]) > tol:
                            f.write(fmt % (g[i, j, k, l], i + 1, j + 1,
                                           k + 1, l + 1))
        for i in range(n):
            for j in range(i + 1):
                if abs(h[i, j]) > tol:
                    f.write(fmt % (h[i, j], i + 1, j + 1, 0, 0))
        f.write(fmt % (e_core, 0, 0, 0, 0))


# ---------------------------------------------------------------------------
# DERIVDUMP
# ---------------------------------------------------------------------------

_BLOCKS = ("THALF", "HX", "GX", "DENUC")


def parse_derivdump(path) -> DerivativeIntegralSet:
    """Read a DERIVDUMP file (grammar in docs/formats.md)."""
    with open(path) as f:
        lines = [ln.strip() for ln in f.read().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("DERIVDUMP"):
        raise FormatError("missing DERIVDUMP header")
    head = dict(_NAMELIST_RE.findall(lines[0]))
    try:
        n_ao = int(head["NAO"])
        n_coords = int(head["NCOORDS"])
    except KeyError as exc:
        raise FormatError(f"DERIVDUMP header missing {exc}") from None
    labels: list[str] = []
    T = np.zeros((n_coords, n_ao, n_ao))
    HX = np.zeros((n_coords, n_ao, n_ao))
    GX = np.zeros((n_coords,) + (n_ao,) * 4)
    DN = np.zeros(n_coords)
    pos = 1

    def expect(tag):
        nonlocal pos
        if pos >= len(lines) or lines[pos].split()[0] != tag:
            got = lines[pos] if pos < len(lines) else "<eof>"
            raise FormatError(f"expected {tag}, got {got!r}")
        line = lines[pos]
        pos += 1
        return line

    def check_idx(v):
        if not 1 <= v <= n_ao:
            raise FormatError(f"index {v} outside 1..{n_ao}")
        return v - 1

    for k in range(n_coords):
        coord_line = expect("COORD").split()
        if len(coord_line) != 3 or int(coord_line[1]) != k + 1:
            raise FormatError(f"COORD blocks must be numbered in order; got "
                              f"{' '.join(coord_line)!r}")
        labels.append(coord_line[2])
        for block in _BLOCKS:
            expect(block)
            while lines[pos] != "END":
                parts = lines[pos].split()
                pos += 1
                value = float(parts[0])
                if block == "THALF":
                    if len(parts) != 3:
                        raise FormatError(f"THALF line needs value i j: {parts}")
                    i, j = check_idx(int(parts[1])), check_idx(int(parts[2]))
                    if T[k, i, j] != 0.0 and abs(T[k, i, j] - value) > _DUP_TOL:
                        raise FormatError(f"contradictory THALF entry ({i},{j})")
                    T[k, i, j] = value
                elif block == "HX":
                    if len(parts) != 3:
                        raise FormatError(f"HX line needs value i j: {parts}")
                    _set_sym(HX[k], check_idx(int(parts[1])),
                             check_idx(int(parts[2])), value, "HX")
                elif block == "GX":
                    if len(parts) != 5:
                        raise FormatError(f"GX line needs value i j k l: {parts}")
                    _set_g(GX[k], *(check_idx(int(p)) for p in parts[1:]),
                           value, "GX")
                else:
                    if len(parts) != 1:
                        raise FormatError(f"DENUC line carries one value: {parts}")
                    DN[k] = value
            expect("END")
        expect("ENDCOORD")
    if pos != len(lines):
        raise FormatError(f"trailing content after last ENDCOORD: {lines[pos]!r}")
    return DerivativeIntegralSet(tuple(labels), T, HX, GX, DN)


def write_derivdump(path, derivs: DerivativeIntegralSet,
                    tol: float = 0.0) -> None:
    n_ao = derivs.n_ao
    with open(path, "w") as f:
        f.write(f"DERIVDUMP NAO={n_ao} NCOORDS={derivs.n_coords}\n")
        for k, label in enumerate(derivs.labels):
            f.write(f"COORD {k + 1} {label}\n")
            f.write("THALF\n")
            for i in range(n_ao):
                for j in range(n_ao):
                    if abs(derivs.T_half[k, i, j]) > tol:
                        f.write("%.17g %d %d\n" % (derivs.T_half[k, i, j],
                                                   i + 1, j + 1))
            f.write("END\nHX\n")
            for i in range(n_ao):
                for j in range(i + 1):
                    if abs(derivs.h_x_ao[k, i, j]) > tol:
                        f.write("%.17g %d %d\n" % (derivs.h_x_ao[k, i, j],
                                                   i + 1, j + 1))
            f.write("END\nGX\n")
            written = set()
            for i in range(n_ao):
                for j in range(n_ao):
                    for a in range(n_ao):
                        for b in range(n_ao):
                            key = min(_g_images(i, j, a, b))
                            if key in written:
                                continue
                            written.add(key)
                            if abs(derivs.g_x_ao[k, i, j, a, b]) > tol:
                                f.write("%.17g %d %d %d %d\n" %
                                        (derivs.g_x_ao[k, i, j, a, b],
                                         i + 1, j + 1, a + 1, b + 1))
            f.write("END\nDENUC\n")
            f.write("%.17g\n" % derivs.de_nuc[k])
            f.write("END\nENDCOORD\n")


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def symmetrize_eightfold(g: np.ndarray) -> np.ndarray:
    """Average over the 8-fold index group (removes round-off asymmetry)."""
    g = 0.5 * (g + g.transpose(1, 0, 2, 3))
    g = 0.5 * (g + g.transpose(0, 1, 3, 2))
    g = 0.5 * (g + g.transpose(2, 3, 0, 1))
    return g


def ao_to_mo(integrals: IntegralSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(h_mo, g_mo, S_mo) under the current MO coefficients."""
    C = integrals.C
    h_mo = C.T @ integrals.h_ao @ C
    g_mo = transform_two_electron(integrals.g_ao, C)
    S_mo = C.T @ integrals.S_ao @ C
    return h_mo, g_mo, S_mo


def transform_two_electron(g_ao: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Four-index transform, one index at a time."""
    g = np.einsum("up,uvkl->pvkl", C, g_ao, optimize=True)
    g = np.einsum("vq,pvkl->pqkl", C, g, optimize=True)
    g = np.einsum("kr,pqkl->pqrl", C, g, optimize=True)
    g = np.einsum("ls,pqrl->pqrs", C, g, optimize=True)
    return g


def frozen_fock(h_mo: np.ndarray, g_mo: np.ndarray,
                frozen: tuple[int, ...]) -> np.ndarray:
    """F^frozen_pq = h_pq + sum_i (2 g_pqii - g_piiq) over frozen i."""
    F = h_mo.copy()
    for i in frozen:
        F += 2.0 * g_mo[:, :, i, i] - g_mo[:, i, i, :]
    return F


def fold_frozen_core(h_mo: np.ndarray, g_mo: np.ndarray, e_nuc: float,
                     partition: OrbitalPartition,
                     n_elec: int) -> ActiveHamiltonian:
    """Fold doubly-occupied frozen orbitals into an ActiveHamiltonian.

    The effective one-body operator is the frozen Fock matrix restricted
    to the active block; the scalar collects e_nuc plus
    sum_i (h_ii + F^frozen_ii).  The same folding applies verbatim to
    derivative integrals (it is linear in h, g and the scalar).
    """
    act = list(partition.active)
    if len(act) > partition.n_orb:
        raise ValueError("active space larger than orbital count")
    n_elec_active = n_elec - 2 * len(partition.frozen)
    if n_elec_active < 0:
        raise ValueError("frozen orbitals hold more electrons than available")
    F = frozen_fock(h_mo, g_mo, partition.frozen)
    e_core = e_nuc
    for i in partition.frozen:
        e_core += h_mo[i, i] + F[i, i]
    h_eff = F[np.ix_(act, act)]
    g_act = g_mo[np.ix_(act, act, act, act)]
    return ActiveHamiltonian(h_eff, g_act, float(e_core), len(act),
                             n_elec_active, validate=False)


def active_hamiltonian(integrals: IntegralSet) -> ActiveHamiltonian:
    h_mo, g_mo, _ = ao_to_mo(integrals)
    return fold_frozen_core(h_mo, g_mo, integrals.e_nuc,
                            integrals.partition, integrals.n_elec)


def lowdin_core_guess(S_ao: np.ndarray, h_ao: np.ndarray) -> np.ndarray:
    """Orthonormal MO guess: diagonalize h in the Lowdin-orthogonalized basis."""
    w, V = np.linalg.eigh(S_ao)
    s_inv_half = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    hbar = s_inv_half @ h_ao @ s_inv_half
    e, U = np.linalg.eigh(hbar)
    C = s_inv_half @ U
    # fix gauge: largest-magnitude component of each column positive
    for k in range(C.shape[1]):
        idx = np.argmax(np.abs(C[:, k]))
        if C[idx, k] < 0:
            C[:, k] = -C[:, k]
    return C
