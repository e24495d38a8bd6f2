"""Geometry construction, PES scans and conical-intersection searches.

Drivers operate on a ``SystemSource`` that maps a parameter vector to an
IntegralSet and a DerivativeIntegralSet: the built-in model systems, or a
directory of per-geometry FCIDUMP/DERIVDUMP files (layout documented in
docs/formats.md) for externally produced integrals such as the
formaldimine pipeline.

The two optimizers are plain steepest descent with backtracking step
control: descent on the energy difference to locate a conical
intersection in a 2D parameter plane, and descent on the composite
projected gradient (energy-difference squared balanced against the
seam-projected upper-state gradient) for minimal-energy conical
intersections over all coordinates.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .integrals import (DerivativeIntegralSet, IntegralSet, OrbitalPartition,
                        parse_derivdump, parse_fcidump)
from .response import (BranchingVectors, DegenerateGapError, ResponseContext,
                       analytic_gradient, analytic_nac)
from .savqe import EnsembleConfig, SAOOVQEResult, run_sa_oo_vqe

# Formaldimine construction constants (Angstrom / degrees).
D_NC = 1.498
D_CH = 1.067
D_NH = 0.987
ANGLE_NCH = 118.36


@dataclass(frozen=True)
class GeometrySpec:
    """Cartesian geometry (Angstrom) with an optional internal parametrization."""

    symbols: tuple[str, ...]
    coords: np.ndarray
    internal: dict | None = None

    @property
    def n_atoms(self) -> int:
        return len(self.symbols)

    def flat(self) -> np.ndarray:
        return self.coords.reshape(-1)


def build_formaldimine(alpha: float, phi: float) -> GeometrySpec:
    """CH2NH geometry from the bending angle alpha and dihedral phi (degrees).

    The N-CH2 fragment is planar and fixed: N at the origin, C on +z, the
    two carbon hydrogens mirror images across the N-C axis in the xz
    plane.  The nitrogen hydrogen carries the two internal degrees of
    freedom.  Rebuilding from (alpha, phi) is bit-deterministic.
    """
    a = np.deg2rad(alpha)
    p = np.deg2rad(phi)
    t = np.deg2rad(ANGLE_NCH)
    n = np.zeros(3)
    c = np.array([0.0, 0.0, D_NC])
    h_c1 = c + D_CH * np.array([np.sin(t), 0.0, -np.cos(t)])
    h_c2 = c + D_CH * np.array([-np.sin(t), 0.0, -np.cos(t)])
    h_n = D_NH * np.array([np.sin(a) * np.cos(p), np.sin(a) * np.sin(p),
                           np.cos(a)])
    coords = np.array([n, c, h_n, h_c1, h_c2])
    return GeometrySpec(("N", "C", "H", "H", "H"), coords,
                        {"alpha": float(alpha), "phi": float(phi)})


def internal_jacobian(alpha: float, phi: float) -> np.ndarray:
    """d(Cartesians)/d(alpha, phi) in Angstrom per degree, shape (2, 5, 3).

    Only the nitrogen hydrogen moves; the derivative is the analytic
    differential of the spherical construction.
    """
    a = np.deg2rad(alpha)
    p = np.deg2rad(phi)
    scale = np.pi / 180.0
    J = np.zeros((2, 5, 3))
    J[0, 2] = D_NH * scale * np.array([np.cos(a) * np.cos(p),
                                       np.cos(a) * np.sin(p), -np.sin(a)])
    J[1, 2] = D_NH * scale * np.array([-np.sin(a) * np.sin(p),
                                       np.sin(a) * np.cos(p), 0.0])
    return J


def bond_angle(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """Angle a-b-c in degrees."""
    u = a - b
    v = c - b
    cosv = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.rad2deg(np.arccos(np.clip(cosv, -1.0, 1.0))))


def dihedral_angle(a, b, c, d) -> float:
    """Standard signed dihedral a-b-c-d in degrees."""
    b1 = b - a
    b2 = c - b
    b3 = d - c
    n1 = np.cross(b1, b2)
    n2 = np.cross(b2, b3)
    m1 = np.cross(n1, b2 / np.linalg.norm(b2))
    angle = np.arctan2(np.dot(m1, n2), np.dot(n1, n2))
    return float(np.rad2deg(angle))


def geometry_key(coords: np.ndarray) -> str:
    """Hash key indexing per-geometry integral files (docs/formats.md)."""
    text = " ".join("%.6f" % v for v in np.asarray(coords).reshape(-1))
    return hashlib.sha1(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# system sources
# ---------------------------------------------------------------------------

class SystemSource:
    """Maps a parameter vector to integral data for the drivers."""

    coordinate_labels: tuple[str, ...]
    n_coords: int

    def evaluate(self, params) -> tuple[IntegralSet, DerivativeIntegralSet]:
        raise NotImplementedError


class ModelSource(SystemSource):
    def __init__(self, model, partition: OrbitalPartition | None = None):
        self.model = model
        self.partition = partition
        self.coordinate_labels = model.coordinate_labels
        self.n_coords = len(model.coordinate_labels)

    def evaluate(self, params):
        return (self.model.integral_set(params, self.partition),
                self.model.derivative_set(params))


class FileSource(SystemSource):
    """Per-geometry FCIDUMP + DERIVDUMP files, indexed by geometry key.

    The producer's MO basis is taken as the working basis (unit overlap,
    identity initial coefficients); the DERIVDUMP must be expressed in the
    same basis as the FCIDUMP it accompanies.  For internally
    parametrized runs the parameter-to-geometry map supplies the key.
    """

    def __init__(self, directory: str, partition: OrbitalPartition,
                 n_elec: int, coordinate_labels,
                 params_to_coords=None):
        self.directory = directory
        self.partition = partition
        self.n_elec = n_elec
        self.coordinate_labels = tuple(coordinate_labels)
        self.n_coords = len(self.coordinate_labels)
        self.params_to_coords = params_to_coords or (
            lambda p: np.asarray(p, dtype=float))

    def evaluate(self, params):
        coords = self.params_to_coords(np.asarray(params, dtype=float))
        key = geometry_key(coords)
        fci = os.path.join(self.directory, f"{key}.fcidump")
        drv = os.path.join(self.directory, f"{key}.derivdump")
        for path in (fci, drv):
            if not os.path.exists(path):
                raise FileNotFoundError(
                    f"missing integral file {path} for geometry key {key}")
        h, g, e_core, n_orb, n_elec_file = parse_fcidump(fci)
        if n_elec_file != self.n_elec:
            raise ValueError("FCIDUMP electron count disagrees with source")
        derivs = parse_derivdump(drv)
        ints = IntegralSet(np.eye(n_orb), h, g, np.eye(n_orb), e_core,
                           self.n_elec, self.partition)
        return ints, derivs


def chain_derivatives(derivs: DerivativeIntegralSet, jacobian: np.ndarray,
                      labels) -> DerivativeIntegralSet:
    """Chain-rule Cartesian derivative integrals onto internal coordinates.

    ``jacobian`` has shape (n_internal, n_cartesian); all blocks are linear
    in the coordinate, so the chain rule acts block-wise.
    """
    J = np.asarray(jacobian, dtype=float)
    return DerivativeIntegralSet(
        tuple(labels),
        np.einsum("kc,cij->kij", J, derivs.T_half, optimize=True),
        np.einsum("kc,cij->kij", J, derivs.h_x_ao, optimize=True),
        np.einsum("kc,cijab->kijab", J, derivs.g_x_ao, optimize=True),
        J @ derivs.de_nuc)


def warm_start_coefficients(C_prev: np.ndarray, S_new: np.ndarray) -> np.ndarray:
    """Re-orthonormalize previous MO coefficients in the new overlap metric."""
    M = C_prev.T @ S_new @ C_prev
    w, V = np.linalg.eigh(M)
    m_inv_half = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    return C_prev @ m_inv_half


# ---------------------------------------------------------------------------
# scan driver
# ---------------------------------------------------------------------------

@dataclass
class ScanRow:
    params: np.ndarray
    e0: float
    e1: float
    e_sa: float
    grad0: np.ndarray
    grad1: np.ndarray
    nac: np.ndarray | None
    gap: float
    converged: bool
    degenerate: bool


@dataclass
class ScanResult:
    labels: tuple[str, ...]
    rows: list[ScanRow]

    def table(self) -> str:
        """Plot-ready TSV table."""
        cols = ["idx"]
        cols += [f"p_{l}" for l in self.labels]
        cols += ["E0", "E1", "E_SA", "gap"]
        cols += [f"dE0_{l}" for l in self.labels]
        cols += [f"dE1_{l}" for l in self.labels]
        cols += [f"D01_{l}" for l in self.labels]
        cols += ["converged"]
        lines = ["\t".join(cols)]
        for i, r in enumerate(self.rows):
            vals = [str(i)]
            vals += ["%.10g" % v for v in r.params]
            vals += ["%.12g" % v for v in (r.e0, r.e1, r.e_sa, r.gap)]
            vals += ["%.10g" % v for v in r.grad0]
            vals += ["%.10g" % v for v in r.grad1]
            if r.nac is None:
                vals += ["nan"] * len(self.labels)
            else:
                vals += ["%.10g" % v for v in r.nac]
            vals += ["1" if r.converged else "0"]
            lines.append("\t".join(vals))
        return "\n".join(lines) + "\n"


def _converge_point(source: SystemSource, params, config: EnsembleConfig,
                    theta0=None, C_prev=None) -> tuple[SAOOVQEResult,
                                                       DerivativeIntegralSet]:
    ints, derivs = source.evaluate(params)
    if C_prev is not None and C_prev.shape == ints.C.shape:
        ints.C = warm_start_coefficients(C_prev, ints.S_ao)
        ints.check_orthonormal()
    result = run_sa_oo_vqe(ints, config, theta0)
    return result, derivs


def pes_scan(grid, source: SystemSource, config: EnsembleConfig,
             compute_nac: bool = True) -> ScanResult:
    """Converge every grid point with warm starts and collect derivatives.

    Per-point convergence failures are recorded in the row and the scan
    continues; a degenerate NAC gap is recorded with the NAC left out.
    """
    rows: list[ScanRow] = []
    theta0 = None
    C_prev = None
    for params in grid:
        params = np.asarray(params, dtype=float)
        result, derivs = _converge_point(source, params, config, theta0, C_prev)
        theta0 = result.theta
        C_prev = result.integrals.C
        rc = ResponseContext(result)
        g0 = analytic_gradient(result, 0, derivs, rc)
        g1 = analytic_gradient(result, 1, derivs, rc)
        nac = None
        degenerate = False
        try:
            bv = analytic_nac(result, 0, 1, derivs, rc) if compute_nac else None
            nac = None if bv is None else bv.nac
        except DegenerateGapError:
            degenerate = True
        rows.append(ScanRow(params, result.e0, result.e1, result.e_sa,
                            g0.values, g1.values, nac,
                            result.e1 - result.e0, result.converged,
                            degenerate))
    return ScanResult(source.coordinate_labels, rows)


# ---------------------------------------------------------------------------
# conical-intersection search (2D steepest descent on the gap)
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryPoint:
    params: np.ndarray
    e0: float
    e1: float
    gap: float
    step: float
    projector_residual: float = np.nan


@dataclass
class SearchResult:
    trajectory: list[TrajectoryPoint]
    params: np.ndarray
    converged: bool
    message: str

    def table(self, labels) -> str:
        cols = (["iter"] + [f"p_{l}" for l in labels]
                + ["E0", "E1", "gap", "step", "proj_residual"])
        lines = ["\t".join(cols)]
        for i, t in enumerate(self.trajectory):
            vals = ([str(i)] + ["%.10g" % v for v in t.params]
                    + ["%.12g" % t.e0, "%.12g" % t.e1, "%.12g" % t.gap,
                       "%.6g" % t.step, "%.3g" % t.projector_residual])
            lines.append("\t".join(vals))
        return "\n".join(lines) + "\n"


def ci_search_2d(source: SystemSource, start, config: EnsembleConfig,
                 initial_step: float = 1.0, gap_threshold: float = 1e-6,
                 stagnation_step: float = 1e-6,
                 max_iterations: int = 60) -> SearchResult:
    """Steepest descent on Delta E = E1 - E0 over a 2D parameter plane.

    Accepted steps never increase the gap (backtracking halves the step);
    the run stops on a gap below ``gap_threshold``, on step collapse below
    ``stagnation_step`` (the gap is non-smooth at the intersection apex),
    or at the iteration cap.
    """
    if source.n_coords != 2:
        raise ValueError("ci_search_2d needs a two-parameter system")
    params = np.asarray(start, dtype=float).copy()
    theta0 = None
    C_prev = None
    trajectory: list[TrajectoryPoint] = []
    step = float(initial_step)
    converged = False
    message = "max-iterations"
    for it in range(max_iterations):
        result, derivs = _converge_point(source, params, config, theta0, C_prev)
        theta0, C_prev = result.theta, result.integrals.C
        rc = ResponseContext(result)
        g0 = analytic_gradient(result, 0, derivs, rc).values
        g1 = analytic_gradient(result, 1, derivs, rc).values
        gap = result.e1 - result.e0
        g_de = g1 - g0
        trajectory.append(TrajectoryPoint(params.copy(), result.e0, result.e1,
                                          gap, step))
        if gap < gap_threshold:
            converged = True
            message = "gap-threshold"
            break
        accepted = False
        while step >= stagnation_step:
            trial = params - step * g_de
            try:
                r_t, _ = _converge_point(source, trial, config, theta0, C_prev)
            except ValueError:
                step *= 0.5  # outside the documented domain; shrink
                continue
            if r_t.e1 - r_t.e0 < gap:
                params = trial
                accepted = True
                step = min(step * 1.5, initial_step)
                break
            step *= 0.5
        if not accepted:
            converged = True
            message = "stagnation"
            break
    return SearchResult(trajectory, params, converged, message)


# ---------------------------------------------------------------------------
# MECI search (gradient projection)
# ---------------------------------------------------------------------------

def branching_projector(g_de: np.ndarray, h_vec: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seam-space projector P = 1 - g~ g~^T - h~ h~^T.

    g~ is the normalized gradient difference; h~ is the derivative
    coupling orthonormalized against it.  P is symmetric, idempotent and
    annihilates both vectors.
    """
    n = len(g_de)
    g_t = g_de / np.linalg.norm(g_de)
    h_orth = h_vec - (h_vec @ g_t) * g_t
    nrm = np.linalg.norm(h_orth)
    P = np.eye(n) - np.outer(g_t, g_t)
    if nrm > 1e-12 * max(1.0, np.linalg.norm(h_vec)):
        h_t = h_orth / nrm
        P -= np.outer(h_t, h_t)
    else:
        h_t = np.zeros(n)
    return P, g_t, h_t


def meci_search(source: SystemSource, start, config: EnsembleConfig,
                eta: float = 0.25,
                gap_sq_threshold: float = 1e-13,
                energy_threshold: float = 1e-6,
                initial_step: float = 0.01,
                max_iterations: int = 200) -> SearchResult:
    """Gradient-projection MECI search over all source coordinates.

    Composite gradient g = eta * 2 DeltaE * g~ + (1 - eta) * P dE1/dx with
    the seam projector P; steepest descent with backtracking on the
    monitor eta * DeltaE^2 + (1 - eta) * E1.  Converged when DeltaE^2
    drops below ``gap_sq_threshold`` and the E1 change below
    ``energy_threshold``; otherwise the best-so-far point is returned
    with a flag.
    """
    params = np.asarray(start, dtype=float).copy()
    theta0 = None
    C_prev = None
    trajectory: list[TrajectoryPoint] = []
    step = float(initial_step)
    converged = False
    message = "max-iterations"
    e1_prev = None

    def evaluate(p, th, Cp):
        result, derivs = _converge_point(source, p, config, th, Cp)
        rc = ResponseContext(result)
        g0 = analytic_gradient(result, 0, derivs, rc).values
        g1 = analytic_gradient(result, 1, derivs, rc).values
        try:
            bv = analytic_nac(result, 0, 1, derivs, rc)
            h_vec = bv.h_vec
        except DegenerateGapError as exc:
            h_vec = exc.derivative_coupling
        return result, g0, g1, h_vec

    for it in range(max_iterations):
        result, g0, g1, h_vec = evaluate(params, theta0, C_prev)
        theta0, C_prev = result.theta, result.integrals.C
        gap = result.e1 - result.e0
        g_de = g1 - g0
        P, g_t, h_t = branching_projector(g_de, h_vec)
        resid = max(np.abs(P @ P - P).max(), np.abs(P @ g_t).max(),
                    np.abs(P @ h_t).max())
        trajectory.append(TrajectoryPoint(params.copy(), result.e0, result.e1,
                                          gap, step, resid))
        if (gap * gap < gap_sq_threshold
                and e1_prev is not None
                and abs(result.e1 - e1_prev) < energy_threshold):
            converged = True
            message = "thresholds"
            break
        e1_prev = result.e1
        composite = eta * 2.0 * gap * g_t + (1.0 - eta) * (P @ g1)
        monitor = eta * gap * gap + (1.0 - eta) * result.e1
        accepted = False
        while step >= 1e-8:
            trial = params - step * composite
            try:
                r_t, _ = _converge_point(source, trial, config, theta0, C_prev)
            except ValueError:
                step *= 0.5
                continue
            gap_t = r_t.e1 - r_t.e0
            monitor_t = eta * gap_t * gap_t + (1.0 - eta) * r_t.e1
            if monitor_t < monitor or gap_t * gap_t < gap * gap:
                params = trial
                accepted = True
                step = min(step * 1.4, initial_step)
                break
            step *= 0.5
        if not accepted:
            message = "step-collapse"
            break
    return SearchResult(trajectory, params, converged, message)
