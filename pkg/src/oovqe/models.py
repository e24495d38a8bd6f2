"""Built-in analytic model systems with exact geometry derivatives.

The primary registry entry, ``crossing3``, is a 3-orbital, 4-electron
system over two dimensionless parameters (x, y).  Its atomic-orbital basis
is an explicit frame: AO_mu(x, y) = sum_i chi_i W_i,mu(x, y) over a fixed
orthonormal embedding basis {chi_i}, so overlaps between different
geometries are available in closed form (needed by the wavefunction-overlap
derivative oracle).  All integral maps and their parameter derivatives are
closed-form; analytic derivatives match central finite differences of the
maps to better than 1e-8.

Structure of the intrinsic integrals: the y -> -y mirror flips the sign of
basis function 2, so at y = 0 the occupation parity of orbital 2 is
conserved and the two lowest singlets (a closed-shell-dominated state and
an open-shell 1-2 singlet) cross without interacting.  The exchange
element (12|12) is held negative so the open-shell singlet stays below its
triplet partner.  The degeneracy point is closed-form:

    x* = 2*sqrt(0.1225 - k**2) - 0.5,   k = |(12|12)| = 0.15.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrals import (DerivativeIntegralSet, IntegralSet, OrbitalPartition,
                        lowdin_core_guess, symmetrize_eightfold)

_E0, _E1 = -2.0, -1.0
_U = (0.9, 0.8, 0.7)
_V01, _V02, _V12 = 0.45, 0.35, 0.55
_K12 = -0.15
_H12_SLOPE = 0.20
_H02_SLOPE = 0.10

CROSSING3_DOMAIN = ((-0.5, 0.9), (-0.6, 0.6))

CROSSING3_DEGENERACY = (2.0 * np.sqrt(0.1225 - _K12 ** 2) - 0.5, 0.0)


def _intrinsic_h(x: float, y: float):
    h = np.zeros((3, 3))
    h[0, 0] = _E0
    h[1, 1] = _E1
    h[2, 2] = -0.5 + 0.5 * x
    h[1, 2] = h[2, 1] = _H12_SLOPE * y
    h[0, 2] = h[2, 0] = _H02_SLOPE * y
    dh_dx = np.zeros((3, 3))
    dh_dx[2, 2] = 0.5
    dh_dy = np.zeros((3, 3))
    dh_dy[1, 2] = dh_dy[2, 1] = _H12_SLOPE
    dh_dy[0, 2] = dh_dy[2, 0] = _H02_SLOPE
    return h, dh_dx, dh_dy


def _intrinsic_g():
    g = np.zeros((3,) * 4)
    for p in range(3):
        g[p, p, p, p] = _U[p]
    for (p, q), v in (((0, 1), _V01), ((0, 2), _V02), ((1, 2), _V12)):
        g[p, p, q, q] = g[q, q, p, p] = v
    for idx in ((1, 2, 1, 2), (2, 1, 1, 2), (1, 2, 2, 1), (2, 1, 2, 1)):
        g[idx] = _K12
    return g


_G_INT = _intrinsic_g()


def _frame(x: float, y: float):
    """AO frame W and its parameter derivatives; mirror-odd entries are the
    (0,2),(1,2),(2,0),(2,1) positions."""
    W = np.array([
        [1.0 + 0.05 * np.sin(0.4 * x), 0.08 + 0.04 * np.sin(0.5 * x),
         0.06 * np.sin(0.7 * y)],
        [0.04 * np.sin(0.6 * x), 1.0 + 0.04 * np.cos(0.5 * x),
         0.09 * np.sin(0.5 * y)],
        [0.07 * np.sin(0.4 * y), 0.05 * np.sin(0.8 * y),
         1.0 + 0.03 * np.cos(0.6 * x)],
    ])
    dW_dx = np.array([
        [0.02 * np.cos(0.4 * x), 0.02 * np.cos(0.5 * x), 0.0],
        [0.024 * np.cos(0.6 * x), -0.02 * np.sin(0.5 * x), 0.0],
        [0.0, 0.0, -0.018 * np.sin(0.6 * x)],
    ])
    dW_dy = np.array([
        [0.0, 0.0, 0.042 * np.cos(0.7 * y)],
        [0.0, 0.0, 0.045 * np.cos(0.5 * y)],
        [0.028 * np.cos(0.4 * y), 0.04 * np.cos(0.8 * y), 0.0],
    ])
    return W, dW_dx, dW_dy


def _e_nuc(x: float, y: float):
    e = 0.4 + 0.08 * (x - 0.1) ** 2 + 0.05 * y ** 2
    return e, 0.16 * (x - 0.1), 0.10 * y


def _transform_g(g_int: np.ndarray, W: np.ndarray) -> np.ndarray:
    g = np.einsum("au,abcd->ubcd", W, g_int, optimize=True)
    g = np.einsum("bv,ubcd->uvcd", W, g, optimize=True)
    g = np.einsum("ck,uvcd->uvkd", W, g, optimize=True)
    g = np.einsum("dl,uvkd->uvkl", W, g, optimize=True)
    return g


@dataclass(frozen=True)
class ModelSystem:
    """Closed-form map (x, y) -> AO integrals with exact derivatives."""

    name: str
    n_ao: int
    n_elec: int
    domain: tuple[tuple[float, float], ...]
    coordinate_labels: tuple[str, ...]

    def _check_domain(self, params) -> np.ndarray:
        params = np.atleast_1d(np.asarray(params, dtype=float))
        if params.shape != (len(self.domain),):
            raise ValueError(
                f"{self.name} takes {len(self.domain)} parameters")
        for v, (lo, hi) in zip(params, self.domain):
            if not lo - 1e-9 <= v <= hi + 1e-9:
                raise ValueError(
                    f"parameter {v} outside documented domain [{lo}, {hi}]")
        return params

    def ao_frame(self, params) -> np.ndarray:
        x, y = self._check_domain(params)
        return _frame(x, y)[0]

    def ao_integrals(self, params):
        x, y = self._check_domain(params)
        h_int, _, _ = _intrinsic_h(x, y)
        W, _, _ = _frame(x, y)
        S = 0.5 * ((W.T @ W) + (W.T @ W).T)
        h = W.T @ h_int @ W
        h = 0.5 * (h + h.T)
        g = symmetrize_eightfold(_transform_g(_G_INT, W))
        e_nuc = _e_nuc(x, y)[0]
        return S, h, g, e_nuc

    def integral_set(self, params,
                     partition: OrbitalPartition | None = None) -> IntegralSet:
        S, h, g, e_nuc = self.ao_integrals(params)
        if partition is None:
            partition = OrbitalPartition.cas(self.n_ao, 0, self.n_ao)
        C = lowdin_core_guess(S, h)
        return IntegralSet(S, h, g, C, e_nuc, self.n_elec, partition)

    def derivative_set(self, params) -> DerivativeIntegralSet:
        x, y = self._check_domain(params)
        h_int, dh_dx, dh_dy = _intrinsic_h(x, y)
        W, dW_dx, dW_dy = _frame(x, y)
        _, den_dx, den_dy = _e_nuc(x, y)
        T, HX, GX, DN = [], [], [], []
        for dW, dh_int, dnuc in ((dW_dx, dh_dx, den_dx),
                                 (dW_dy, dh_dy, den_dy)):
            T.append(dW.T @ W)
            hx = dW.T @ h_int @ W + W.T @ dh_int @ W + W.T @ h_int @ dW
            HX.append(0.5 * (hx + hx.T))
            gx = np.zeros((3,) * 4)
            for leg in range(4):
                mats = [W, W, W, W]
                mats[leg] = dW
                term = _G_INT
                term = np.einsum("au,abcd->ubcd", mats[0], term, optimize=True)
                term = np.einsum("bv,ubcd->uvcd", mats[1], term, optimize=True)
                term = np.einsum("ck,uvcd->uvkd", mats[2], term, optimize=True)
                term = np.einsum("dl,uvkd->uvkl", mats[3], term, optimize=True)
                gx += term
            GX.append(symmetrize_eightfold(gx))
            DN.append(dnuc)
        return DerivativeIntegralSet(self.coordinate_labels,
                                     np.array(T), np.array(HX),
                                     np.array(GX), np.array(DN))

    def cross_overlap(self, params_a, params_b) -> np.ndarray:
        """AO overlap <mu(a)|nu(b)> between two geometries."""
        Wa = self.ao_frame(params_a)
        Wb = self.ao_frame(params_b)
        return Wa.T @ Wb


CROSSING3 = ModelSystem(
    name="crossing3",
    n_ao=3,
    n_elec=4,
    domain=CROSSING3_DOMAIN,
    coordinate_labels=("x", "y"),
)

_REGISTRY = {"crossing3": CROSSING3}


def model_system(name: str, params,
                 partition: OrbitalPartition | None = None):
    """Registry lookup returning (IntegralSet, DerivativeIntegralSet)."""
    try:
        model = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model system {name!r}; "
                       f"known: {sorted(_REGISTRY)}") from None
    return model.integral_set(params, partition), model.derivative_set(params)


def get_model(name: str) -> ModelSystem:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model system {name!r}; "
                       f"known: {sorted(_REGISTRY)}") from None
