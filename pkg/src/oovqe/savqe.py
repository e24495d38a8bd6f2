"""State-averaged VQE inner loop, SA-OO alternation and state resolution.

The inner circuit optimizer is a quasi-Newton (BFGS) minimizer driven by
analytic parameter-shift gradients, stopping when the state-averaged
energy changes by less than the configured threshold (1e-8 Ha default)
or after the iteration cap (500).  The outer loop alternates circuit
optimization with Newton-Raphson orbital steps until the global
state-averaged energy change falls below the same threshold, then resolves
the states by the closed-form three-point rotation fit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .ansatz import CIS, HF, CompiledAnsatz, Rotated, prepare_reference
from .fermion import ActiveHamiltonian
from .integrals import IntegralSet, active_hamiltonian, ao_to_mo
from .measure import RDMSet, average_rdms, measure_rdms, measure_transition_rdms
from .orbitals import (complete_rdms, generalized_fock, newton_step,
                       nonredundant_pairs, orbital_gradient, orbital_hessian,
                       rotate_orbitals)
from .pauli import PauliSum
from .response import shift_gradient
from .statevector import StateVector, expectation, transition_element


@dataclass(frozen=True)
class EnsembleConfig:
    """Equi-ensemble (default) SA-OO-VQE settings.

    ``homo``/``lumo`` default to the active-space HOMO/LUMO pair.  General
    weights w_a > w_b are accepted by the energy and circuit optimization;
    state resolution requires the equi-ensemble.
    """

    weights: tuple[float, float] = (0.5, 0.5)
    energy_threshold: float = 1e-8
    max_iterations: int = 500
    max_cycles: int = 30
    oo_gradient_threshold: float = 1e-8
    max_newton_steps: int = 12
    include_active_active: bool = False
    homo: int | None = None
    lumo: int | None = None
    vqe_restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        w_a, w_b = self.weights
        if abs(w_a + w_b - 1.0) > 1e-12 or w_a < 0 or w_b < 0:
            raise ValueError("weights must be non-negative and sum to 1")

    @property
    def equi(self) -> bool:
        return abs(self.weights[0] - self.weights[1]) < 1e-12


class SAVQEContext:
    """Compiled ansatz plus the reference pair for one active space."""

    def __init__(self, n_active: int, n_elec_active: int,
                 config: EnsembleConfig):
        self.config = config
        self.n_active = n_active
        self.n_elec_active = n_elec_active
        n_occ = n_elec_active // 2
        self.homo = config.homo if config.homo is not None else n_occ - 1
        self.lumo = config.lumo if config.lumo is not None else n_occ
        self.compiled = CompiledAnsatz(n_active, n_elec_active)
        self.ref_a = prepare_reference(HF(), n_active, n_elec_active)
        self.ref_b = prepare_reference(CIS(self.homo, self.lumo),
                                       n_active, n_elec_active)

    def rotated_reference(self, phi: float) -> StateVector:
        return prepare_reference(Rotated(phi, self.homo, self.lumo),
                                 self.n_active, self.n_elec_active)

    def state(self, theta, reference: StateVector) -> StateVector:
        return self.compiled.apply(theta, reference)


def sa_energy(theta, hamiltonian: ActiveHamiltonian, ctx: SAVQEContext,
              qubit_h: PauliSum | None = None) -> tuple[float, float, float]:
    """(E_SA, E_A, E_B); the qubit Hamiltonian carries e_core as a scalar."""
    if qubit_h is None:
        qubit_h = hamiltonian.to_qubit()
    w_a, w_b = ctx.config.weights
    e_a = expectation(ctx.state(theta, ctx.ref_a), qubit_h).real
    e_b = expectation(ctx.state(theta, ctx.ref_b), qubit_h).real
    return w_a * e_a + w_b * e_b, e_a, e_b


def sa_gradient(theta, qubit_h: PauliSum, ctx: SAVQEContext) -> np.ndarray:
    w_a, w_b = ctx.config.weights
    g_a = shift_gradient(ctx.compiled, theta, ctx.ref_a, qubit_h)
    g_b = shift_gradient(ctx.compiled, theta, ctx.ref_b, qubit_h)
    return w_a * g_a + w_b * g_b


@dataclass
class VQEResult:
    theta: np.ndarray
    e_sa: float
    converged: bool
    n_iterations: int
    trace: list[float] = field(default_factory=list)


def optimize_circuit(theta0, hamiltonian: ActiveHamiltonian,
                     ctx: SAVQEContext) -> VQEResult:
    """Quasi-Newton minimization of E_SA(theta) with shift-rule gradients.

    Stops when |Delta E_SA| between iterates falls below the configured
    threshold or at the iteration cap.  Extra restart attempts perturb the
    best parameters (seeded, deterministic) to escape shallow local
    minima; non-convergence is reported through the ``converged`` flag
    with the best parameters found, never as an exception.
    """
    cfg = ctx.config
    qubit_h = hamiltonian.to_qubit()
    trace: list[float] = []

    def fun(theta):
        e, _, _ = sa_energy(theta, hamiltonian, ctx, qubit_h)
        return e

    def jac(theta):
        return sa_gradient(theta, qubit_h, ctx)

    best_theta = np.asarray(theta0, dtype=float).copy()
    best_e = fun(best_theta)
    rng = np.random.default_rng(cfg.seed)
    converged = False
    total_iter = 0
    for attempt in range(1 + cfg.vqe_restarts):
        x0 = (best_theta if attempt == 0
              else best_theta + rng.normal(scale=0.05, size=best_theta.shape))
        last = {"f": fun(x0), "stopped": False}

        def callback(xk):
            f = fun(xk)
            trace.append(f)
            if abs(last["f"] - f) < cfg.energy_threshold:
                last["stopped"] = True
                raise StopIteration
            last["f"] = f

        res = scipy.optimize.minimize(
            fun, x0, jac=jac, method="BFGS", callback=callback,
            options={"maxiter": cfg.max_iterations, "gtol": 1e-12})
        total_iter += res.nit
        e_fin = float(res.fun)
        this_converged = last["stopped"] or bool(res.success)
        if e_fin <= best_e:
            best_e = e_fin
            best_theta = np.asarray(res.x, dtype=float)
            converged = this_converged
        if converged:
            break
    return VQEResult(best_theta, best_e, converged, total_iter, trace)


# ---------------------------------------------------------------------------
# state resolution
# ---------------------------------------------------------------------------

@dataclass
class ResolutionResult:
    phi: float
    e0: float
    e1: float
    degenerate: bool
    off_diagonal: float


def resolve_states(theta_star, hamiltonian: ActiveHamiltonian,
                   ctx: SAVQEContext) -> ResolutionResult:
    """Closed-form rotation angle minimizing the first resolved energy.

    E0(phi) is exactly a + b cos(2 phi) + c sin(2 phi) for the real
    equi-ensemble pair, so three evaluations at phi = 0, pi/4, pi/2
    determine the minimizer.  Refuses non-equal weights.
    """
    if not ctx.config.equi:
        raise ValueError("state resolution requires the equi-ensemble")
    qubit_h = hamiltonian.to_qubit()

    def e0_of(phi):
        state = ctx.state(theta_star, ctx.rotated_reference(phi))
        return expectation(state, qubit_h).real

    e_0 = e0_of(0.0)
    e_q = e0_of(np.pi / 4.0)
    e_h = e0_of(np.pi / 2.0)
    a = 0.5 * (e_0 + e_h)
    b = 0.5 * (e_0 - e_h)
    c = e_q - a
    amp = float(np.hypot(b, c))
    if amp < 1e-12 * max(1.0, abs(a)):
        phi_star, degenerate = 0.0, True
    else:
        phi_star = 0.5 * np.arctan2(c, b) + 0.5 * np.pi
        phi_star = float(phi_star % np.pi)
        degenerate = False
    s0 = ctx.state(theta_star, ctx.rotated_reference(phi_star))
    s1 = ctx.state(theta_star, ctx.rotated_reference(phi_star + np.pi / 2.0))
    e0 = expectation(s0, qubit_h).real
    e1 = expectation(s1, qubit_h).real
    off = abs(transition_element(s0, qubit_h, s1))
    return ResolutionResult(phi_star, e0, e1, degenerate, off)


# ---------------------------------------------------------------------------
# full SA-OO-VQE driver
# ---------------------------------------------------------------------------

@dataclass
class SAOOVQEResult:
    """Converged parameters, resolved energies and the iteration trace."""

    theta: np.ndarray
    phi: float
    e0: float
    e1: float
    e_sa: float
    integrals: IntegralSet
    config: EnsembleConfig
    trace: list[tuple[str, int, float]]
    converged: bool
    vqe_converged: bool
    oo_converged: bool
    degenerate: bool
    n_cycles: int
    off_diagonal: float

    @property
    def n_active(self) -> int:
        return len(self.integrals.partition.active)

    @property
    def n_elec_active(self) -> int:
        return self.integrals.n_elec - 2 * len(self.integrals.partition.frozen)

    def context(self) -> SAVQEContext:
        return SAVQEContext(self.n_active, self.n_elec_active, self.config)

    def hamiltonian(self) -> ActiveHamiltonian:
        return active_hamiltonian(self.integrals)

    def resolved_state(self, index: int, ctx: SAVQEContext) -> StateVector:
        """Resolved eigenstate |Psi_index> (index 0 or 1)."""
        phi = self.phi + (0.0 if index == 0 else np.pi / 2.0)
        return ctx.state(self.theta, ctx.rotated_reference(phi))


def _sa_rdms(theta, ctx: SAVQEContext) -> tuple[RDMSet, RDMSet, RDMSet]:
    state_a = ctx.state(theta, ctx.ref_a)
    state_b = ctx.state(theta, ctx.ref_b)
    rdm_a = measure_rdms(state_a, ctx.n_active, "state-A")
    rdm_b = measure_rdms(state_b, ctx.n_active, "state-B")
    sa = average_rdms([rdm_a, rdm_b], list(ctx.config.weights))
    return rdm_a, rdm_b, sa


def run_sa_oo_vqe(integrals: IntegralSet, config: EnsembleConfig,
                  theta0: np.ndarray | None = None) -> SAOOVQEResult:
    """Alternate SA-VQE and Newton-Raphson orbital steps to convergence.

    Stops when the state-averaged energy change over a full cycle drops
    below ``config.energy_threshold``, then resolves the states.  Inner
    non-convergence is propagated through flags.
    """
    ints = integrals.copy()
    part = ints.partition
    n_active = len(part.active)
    n_elec_active = ints.n_elec - 2 * len(part.frozen)
    ctx = SAVQEContext(n_active, n_elec_active, config)
    pairs = nonredundant_pairs(part, config.include_active_active)
    theta = (np.zeros(ctx.compiled.n_params) if theta0 is None
             else np.asarray(theta0, dtype=float).copy())
    trace: list[tuple[str, int, float]] = []
    e_prev_cycle = None
    vqe_ok = oo_ok = True
    converged = False
    n_cycles = 0
    for cycle in range(config.max_cycles):
        n_cycles = cycle + 1
        ah = active_hamiltonian(ints)
        vqe = optimize_circuit(theta, ah, ctx)
        theta = vqe.theta
        vqe_ok = vqe.converged
        e_sa = vqe.e_sa
        trace.append(("sa-vqe", cycle, e_sa))
        oo_ok = True
        if pairs:
            for step_idx in range(config.max_newton_steps):
                h_mo, g_mo, _ = ao_to_mo(ints)
                _, _, sa = _sa_rdms(theta, ctx)
                gamma_full, Gamma_full = complete_rdms(sa.gamma, sa.Gamma, part)
                F = generalized_fock(sa.gamma, sa.Gamma, h_mo, g_mo, part)
                G = orbital_gradient(F.general, pairs)
                if np.max(np.abs(G)) < config.oo_gradient_threshold:
                    break
                H = orbital_hessian(gamma_full, Gamma_full, h_mo, g_mo, pairs)
                result = newton_step(G, H, pairs, part.n_orb)
                # plain Newton with level shift; halve on uphill steps so the
                # accepted trace stays non-increasing
                scale = 1.0
                C_old = ints.C.copy()
                for _ in range(6):
                    rot = replace(result.rotation,
                                  kappa=scale * result.rotation.kappa)
                    ints.C = rotate_orbitals(C_old, rot)
                    e_new, _, _ = sa_energy(theta, active_hamiltonian(ints), ctx)
                    if e_new <= e_sa + 1e-12:
                        break
                    scale *= 0.5
                else:
                    ints.C = C_old
                    oo_ok = False
                    break
                e_sa = e_new
                trace.append(("sa-oo", cycle, e_sa))
            else:
                h_mo, g_mo, _ = ao_to_mo(ints)
                _, _, sa = _sa_rdms(theta, ctx)
                F = generalized_fock(sa.gamma, sa.Gamma, h_mo, g_mo, part)
                G = orbital_gradient(F.general, pairs)
                oo_ok = np.max(np.abs(G)) < 10 * config.oo_gradient_threshold
        if e_prev_cycle is not None and abs(e_prev_cycle - e_sa) < config.energy_threshold:
            converged = vqe_ok and oo_ok
            e_prev_cycle = e_sa
            break
        e_prev_cycle = e_sa
    ah = active_hamiltonian(ints)
    if config.equi:
        res = resolve_states(theta, ah, ctx)
        phi, e0, e1, degenerate, off = (res.phi, res.e0, res.e1,
                                        res.degenerate, res.off_diagonal)
    else:
        e_sa_fin, e_a, e_b = sa_energy(theta, ah, ctx)
        phi, degenerate, off = 0.0, False, float("nan")
        e0, e1 = sorted((e_a, e_b))
    w_a, w_b = config.weights
    return SAOOVQEResult(
        theta=theta, phi=phi, e0=e0, e1=e1, e_sa=w_a * e0 + w_b * e1,
        integrals=ints, config=config, trace=trace, converged=converged,
        vqe_converged=vqe_ok, oo_converged=oo_ok, degenerate=degenerate,
        n_cycles=n_cycles, off_diagonal=off)


# ---------------------------------------------------------------------------
# checkpoint file (layout documented in docs/formats.md)
# ---------------------------------------------------------------------------

def save_checkpoint(path, result: SAOOVQEResult) -> None:
    with open(path, "w") as f:
        f.write("OOVQE CHECKPOINT v1\n")
        f.write(f"N_PARAMS {len(result.theta)}\n")
        f.write("THETA\n")
        for v in result.theta:
            f.write("%.17g\n" % v)
        f.write("END\n")
        f.write("PHI %.17g\n" % result.phi)
        C = result.integrals.C
        f.write(f"C {C.shape[0]} {C.shape[1]}\n")
        for row in C:
            f.write(" ".join("%.17g" % v for v in row) + "\n")
        f.write("END\n")
        f.write("TRACE\n")
        for phase, cycle, e in result.trace:
            f.write(f"{phase} {cycle} %.17g\n" % e)
        f.write("END\n")


def load_checkpoint(path) -> dict:
    """Returns {'theta', 'phi', 'C', 'trace'} from a checkpoint file."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0] != "OOVQE CHECKPOINT v1":
        raise ValueError("not an OOVQE checkpoint file")
    pos = 1
    out: dict = {}
    n_params = int(lines[pos].split()[1]); pos += 1
    assert lines[pos] == "THETA"; pos += 1
    theta = []
    while lines[pos] != "END":
        theta.append(float(lines[pos])); pos += 1
    pos += 1
    if len(theta) != n_params:
        raise ValueError("theta length mismatch in checkpoint")
    out["theta"] = np.array(theta)
    out["phi"] = float(lines[pos].split()[1]); pos += 1
    _, nr, nc = lines[pos].split(); pos += 1
    rows = []
    while lines[pos] != "END":
        rows.append([float(v) for v in lines[pos].split()]); pos += 1
    pos += 1
    C = np.array(rows)
    if C.shape != (int(nr), int(nc)):
        raise ValueError("C shape mismatch in checkpoint")
    out["C"] = C
    assert lines[pos] == "TRACE"; pos += 1
    trace = []
    while lines[pos] != "END":
        phase, cycle, e = lines[pos].split(); pos += 1
        trace.append((phase, int(cycle), float(e)))
    out["trace"] = trace
    return out
