"""Response derivatives: parameter-shift engine, coupled-perturbed solves,
analytic nuclear gradients and non-adiabatic couplings.

Parameter-shift convention.  The circuit applies, for parameter theta_j,
Pauli factors exp(-i * a_x / 2 * P_x) with a_x = w_x * theta_j; the chain
weight w_x comes from the Jordan-Wigner coefficient of the generator.  The
derivative of any expectation with respect to theta_j is then exactly

    G_j = sum_x w_x * 1/2 * (<M>_{a_x + pi/2} - <M>_{a_x - pi/2}),

one shifted evaluation pair per factor; for unit-weight factors this is
the familiar 1/2 * sum of shifted differences.  The rule is exact for the
product-form circuit because every factor generator is an involutory
Pauli string.

Measurement counting.  One "measurement" is one expectation value of one
Hermitian operator on one prepared (possibly shifted) state; the counters
record that number for every Hessian build.  The headline CAS(4,3) totals
quoted for these matrices follow the fixed arithmetic of 256 evaluations
per circuit-circuit entry (78 entries -> 19968) and 256 per
circuit-orbital parameter row (12 rows -> 3072); the per-element
shift-rule arithmetic of 16 evaluations per row would give 192 instead.
Both conventions are reported; see docs/conventions.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import CompiledAnsatz
from .fermion import ActiveHamiltonian
from .integrals import (DerivativeIntegralSet, IntegralSet, OrbitalPartition,
                        ao_to_mo, fold_frozen_core, transform_two_electron)
from .measure import measure_rdms, measure_transition_rdms, average_rdms
from .orbitals import (complete_rdms, contract_energy, generalized_fock,
                       kappa_matrix, nonredundant_pairs,
                       sa_orbital_gradient_vector, orbital_hessian)
from .pauli import PauliSum
from .statevector import StateVector, expectation

HALF_PI = 0.5 * np.pi

PAPER_EVALS_PER_HCC_ENTRY = 256
PAPER_EVALS_PER_HCO_ROW = 256
APPENDIX_EVALS_PER_HCO_ROW = 16


class DegenerateGapError(RuntimeError):
    """NAC requested at a (near-)degeneracy; carries the finite numerator.

    ``derivative_coupling`` holds (E_J - E_I) * D^CI per coordinate, which
    stays well-defined at the intersection and is what MECI drivers need.
    """

    def __init__(self, gap: float, derivative_coupling: np.ndarray,
                 csf_term: np.ndarray, labels):
        super().__init__(f"energy gap {gap:.3e} Ha below the 1e-8 Ha "
                         "threshold; NAC division is ill-defined")
        self.gap = gap
        self.derivative_coupling = derivative_coupling
        self.csf_term = csf_term
        self.labels = tuple(labels)


@dataclass
class MeasurementCounts:
    """Expectation-evaluation tallies for the Hessian blocks."""

    hcc_entries: int = 0
    hco_rows: int = 0
    hcc_evaluations: int = 0          # actual counted evaluations
    hco_state_preparations: int = 0   # shifted states whose RDMs are taken

    @property
    def hcc_paper_total(self) -> int:
        return PAPER_EVALS_PER_HCC_ENTRY * self.hcc_entries

    @property
    def hco_paper_total(self) -> int:
        return PAPER_EVALS_PER_HCO_ROW * self.hco_rows

    @property
    def hco_appendix_total(self) -> int:
        return APPENDIX_EVALS_PER_HCO_ROW * self.hco_rows


# ---------------------------------------------------------------------------
# parameter-shift primitives
# ---------------------------------------------------------------------------

def shift_gradient(compiled: CompiledAnsatz, theta, reference: StateVector,
                   op: PauliSum, counter: list | None = None,
                   method: str = "direct") -> np.ndarray:
    """d<op>/d(theta) by the product parameter-shift rule (exact).

    ``method="shifted"`` literally prepares every +-pi/2-shifted circuit,
    one expectation pair per Pauli factor (the counted protocol).
    ``method="direct"`` evaluates the identical shift-rule sum through
    the algebraic identity <M>_+ - <M>_- = 2 Im <psi|M|xi_x> with
    xi_x the circuit state carrying one extra P_x after factor x; the two
    paths agree to machine precision and the fast one is used in hot
    optimizer loops.
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros(compiled.n_params)
    if method == "shifted":
        for pos in range(compiled.n_factors):
            j = compiled.param_idx[pos]
            w = compiled.weights[pos]
            if w == 0.0:
                continue
            e_plus = expectation(compiled.apply(theta, reference,
                                                {pos: HALF_PI}), op).real
            e_minus = expectation(compiled.apply(theta, reference,
                                                 {pos: -HALF_PI}), op).real
            if counter is not None:
                counter[0] += 2
            grad[j] += 0.5 * w * (e_plus - e_minus)
        return grad
    if method != "direct":
        raise ValueError(f"unknown gradient method {method!r}")
    from . import kernels
    angles = compiled.angles(theta)
    psi = compiled.apply(theta, reference).amplitudes
    xs, zs, ip, cs = op.packed()
    lam = kernels.apply_paulisum(psi, xs, zs, ip, cs)
    pre = psi.copy()
    for pos in range(compiled.n_factors - 1, -1, -1):
        x, z, k = (int(compiled.x_masks[pos]), int(compiled.z_masks[pos]),
                   int(compiled.i_pows[pos]))
        tmp = kernels.apply_pauli(pre, x, z, k)
        j = compiled.param_idx[pos]
        grad[j] += compiled.weights[pos] * float(np.vdot(lam, tmp).imag)
        kernels.apply_pauli_exp(pre, x, z, k, -float(angles[pos]))
        kernels.apply_pauli_exp(lam, x, z, k, -float(angles[pos]))
    return grad


def sa_shift_gradient(compiled, theta, references, weights, op,
                      counter: list | None = None) -> np.ndarray:
    total = np.zeros(compiled.n_params)
    for w, ref in zip(weights, references):
        total += w * shift_gradient(compiled, theta, ref, op, counter)
    return total


def circuit_hessian(compiled: CompiledAnsatz, theta, references, weights,
                    op: PauliSum,
                    method: str = "direct") -> tuple[np.ndarray,
                                                     MeasurementCounts]:
    """H^CC_{kj} = d^2 <op>_SA / d theta_k d theta_j by double shifts.

    ``method="shifted"`` performs the literal quarter-weighted four-point
    double-shift sum over all factor pairs (the counted protocol).
    ``method="direct"`` evaluates the identical second derivative through
    the factor-insertion identity (see _factor_hessian); the two paths
    agree to machine precision.
    """
    theta = np.asarray(theta, dtype=float)
    n = compiled.n_params
    counts = MeasurementCounts(hcc_entries=n * (n + 1) // 2)
    if method == "direct":
        H = np.zeros((n, n))
        for w, ref in zip(weights, references):
            H += w * _factor_hessian(compiled, theta, ref, op)
        return H, counts
    if method != "shifted":
        raise ValueError(f"unknown Hessian method {method!r}")
    H = np.zeros((n, n))
    slices = [compiled.factor_slices(j) for j in range(n)]
    for k in range(n):
        for j in range(k + 1):
            acc = 0.0
            for pos_k in slices[k]:
                wk = compiled.weights[pos_k]
                for pos_j in slices[j]:
                    wj = compiled.weights[pos_j]
                    for sk in (HALF_PI, -HALF_PI):
                        for sj in (HALF_PI, -HALF_PI):
                            if pos_k == pos_j:
                                shifts = {int(pos_k): sk + sj}
                            else:
                                shifts = {int(pos_k): sk, int(pos_j): sj}
                            sign = np.sign(sk) * np.sign(sj)
                            val = 0.0
                            for w, ref in zip(weights, references):
                                val += w * expectation(
                                    compiled.apply(theta, ref, shifts), op).real
                                counts.hcc_evaluations += 1
                            acc += 0.25 * wk * wj * sign * val
            H[k, j] = H[j, k] = acc
    return H, counts


def _factor_hessian(compiled: CompiledAnsatz, theta, reference: StateVector,
                    op: PauliSum) -> np.ndarray:
    """Second derivative of <op> over parameters via factor insertions.

    With D_x = (d/da_x)|psi> obtained by inserting -i/2 P_x after factor
    x, the per-factor Hessian is T_xy = 2 Re <D_x|op|D_y>
    + 2 Re <psi|op|DD_xy>, equal term by term to the four-point
    double-shift sum; parameter chain weights contract it to H^CC.
    """
    from . import kernels
    theta = np.asarray(theta, dtype=float)
    angles = compiled.angles(theta)
    nf = compiled.n_factors
    dim = reference.amplitudes.shape[0]
    xs_op, zs_op, ip_op, cs_op = op.packed()

    def factor_args(pos):
        return (int(compiled.x_masks[pos]), int(compiled.z_masks[pos]),
                int(compiled.i_pows[pos]))

    # forward prefixes: prefix[x] = factors 0..x-1 applied
    prefixes = np.empty((nf + 1, dim), dtype=np.complex128)
    state = reference.amplitudes.copy()
    prefixes[0] = state
    for pos in range(nf):
        x, z, k = factor_args(pos)
        kernels.apply_pauli_exp(state, x, z, k, float(angles[pos]))
        prefixes[pos + 1] = state
    psi = prefixes[nf]
    # D_x = suffix(x+1..) (-i/2 P_x) prefix[x+1]
    D = np.empty((nf, dim), dtype=np.complex128)
    for pos in range(nf):
        x, z, k = factor_args(pos)
        v = -0.5j * kernels.apply_pauli(np.ascontiguousarray(prefixes[pos + 1]),
                                        x, z, k)
        for q in range(pos + 1, nf):
            xq, zq, kq = factor_args(q)
            kernels.apply_pauli_exp(v, xq, zq, kq, float(angles[q]))
        D[pos] = v
    HD = np.empty_like(D)
    for pos in range(nf):
        HD[pos] = kernels.apply_paulisum(np.ascontiguousarray(D[pos]),
                                         xs_op, zs_op, ip_op, cs_op)
    A = 2.0 * np.real(np.conj(D) @ HD.T)
    # B_xy = 2 Re <lambda| S_{y+1} G_y M_{x+1..y} G_x prefix[x+1]>, x <= y,
    # with G = -i/2 P and M the factors strictly between the insertions
    # (inclusive of U_y, which commutes with its own G_y).
    lam = kernels.apply_paulisum(np.ascontiguousarray(psi),
                                 xs_op, zs_op, ip_op, cs_op)
    B = np.zeros((nf, nf))
    Lam = lam.copy()  # invariant: (S_{y+1..})^dagger lambda at loop entry
    for y in range(nf - 1, -1, -1):
        xy, zy, ky = factor_args(y)
        # diagonal: no factor between the two insertions
        rho = np.conj(-0.5j) * kernels.apply_pauli(Lam, xy, zy, ky)
        gy_pre = -0.5j * kernels.apply_pauli(
            np.ascontiguousarray(prefixes[y + 1]), xy, zy, ky)
        B[y, y] += 2.0 * float(np.vdot(rho, gy_pre).real)
        # off-diagonal sweep: M starts with U_y
        kernels.apply_pauli_exp(rho, xy, zy, ky, -float(angles[y]))
        for x in range(y - 1, -1, -1):
            xx, zx, kx = factor_args(x)
            gx_pre = -0.5j * kernels.apply_pauli(
                np.ascontiguousarray(prefixes[x + 1]), xx, zx, kx)
            val = 2.0 * float(np.vdot(rho, gx_pre).real)
            B[x, y] += val
            B[y, x] += val
            kernels.apply_pauli_exp(rho, xx, zx, kx, -float(angles[x]))
        kernels.apply_pauli_exp(Lam, xy, zy, ky, -float(angles[y]))
    T = A + B
    # contract factor pairs to parameters with the chain weights
    V = np.zeros((nf, compiled.n_params))
    for pos in range(nf):
        V[pos, compiled.param_idx[pos]] = compiled.weights[pos]
    return V.T @ T @ V


def shifted_sa_rdms(compiled, theta, references, weights, pos: int,
                    delta: float, n_active: int):
    """State-averaged active RDMs with one factor angle shifted."""
    sets = []
    for ref in references:
        state = compiled.apply(theta, ref, {int(pos): delta})
        sets.append(measure_rdms(state, n_active, "shifted"))
    return average_rdms(sets, list(weights))


def circuit_orbital_hessian(compiled, theta, references, weights,
                            h_mo, g_mo, partition: OrbitalPartition,
                            pairs) -> tuple[np.ndarray, MeasurementCounts]:
    """H^CO_{j,pq} from generalized Fock matrices of shifted-RDM states.

    Row j collects, over the factors of parameter j,
    w_x * (F_{x+, pq} - F_{x+, qp} - F_{x-, pq} + F_{x-, qp}) with F built
    from the state-averaged RDMs at the shifted angle.
    """
    theta = np.asarray(theta, dtype=float)
    n = compiled.n_params
    n_active = len(partition.active)
    H = np.zeros((n, len(pairs)))
    counts = MeasurementCounts(hco_rows=n)
    for pos in range(compiled.n_factors):
        j = int(compiled.param_idx[pos])
        w = compiled.weights[pos]
        diff = np.zeros(len(pairs))
        for delta, sign in ((HALF_PI, 1.0), (-HALF_PI, -1.0)):
            sa = shifted_sa_rdms(compiled, theta, references, weights,
                                 pos, delta, n_active)
            counts.hco_state_preparations += len(references)
            F = generalized_fock(sa.gamma, sa.Gamma, h_mo, g_mo,
                                 partition).general
            A = F - F.T
            diff += sign * np.array([A[p, q] for p, q in pairs])
        H[j, :] += w * diff
    return H, counts


# ---------------------------------------------------------------------------
# coupled-perturbed solve
# ---------------------------------------------------------------------------

@dataclass
class ResponseSystem:
    """Hessian blocks, right-hand sides and solved Lagrange multipliers."""

    h_oo: np.ndarray
    h_cc: np.ndarray
    h_co: np.ndarray            # (n_params, n_pairs)
    pairs: tuple[tuple[int, int], ...]
    g_o: np.ndarray
    g_c: np.ndarray
    kappa_bar: np.ndarray = field(default=None)  # type: ignore[assignment]
    theta_bar: np.ndarray = field(default=None)  # type: ignore[assignment]
    phi_bar: float | None = None
    residual: float = np.nan
    singular: bool = False
    counts: MeasurementCounts | None = None

    def solve(self) -> None:
        """Block solve [[H_OO, H_OC], [H_CO, H_CC]] (kappa, theta) = -(G_O, G_C)."""
        n_o = len(self.pairs)
        n_c = self.h_cc.shape[0]
        A = np.zeros((n_o + n_c, n_o + n_c))
        A[:n_o, :n_o] = self.h_oo
        A[:n_o, n_o:] = self.h_co.T
        A[n_o:, :n_o] = self.h_co
        A[n_o:, n_o:] = self.h_cc
        rhs = -np.concatenate([self.g_o, self.g_c])
        try:
            sol = np.linalg.solve(A, rhs)
            self.singular = False
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            self.singular = True
        res = np.linalg.norm(A @ sol - rhs)
        scale = max(np.linalg.norm(rhs), 1.0)
        self.residual = float(res / scale)
        self.kappa_bar = sol[:n_o]
        self.theta_bar = sol[n_o:]


# ---------------------------------------------------------------------------
# nuclear derivative of the Hamiltonian
# ---------------------------------------------------------------------------

@dataclass
class DerivativeHamiltonian:
    """MO-basis dH/dx pieces for one nuclear coordinate."""

    dh_mo: np.ndarray
    dg_mo: np.ndarray
    de_nuc: float
    label: str


def _sym_anticommutator_h(S: np.ndarray, h: np.ndarray) -> np.ndarray:
    # {S, h}_pq = sum_o (S_po h_oq + S_qo h_po) = S h + h S for symmetric S, h
    return S @ h + h @ S


def _sym_anticommutator_g(S: np.ndarray, g: np.ndarray) -> np.ndarray:
    return (np.einsum("po,oqrs->pqrs", S, g, optimize=True)
            + np.einsum("qo,pors->pqrs", S, g, optimize=True)
            + np.einsum("ro,pqos->pqrs", S, g, optimize=True)
            + np.einsum("so,pqro->pqrs", S, g, optimize=True))


def hamiltonian_nuclear_derivative(derivs: DerivativeIntegralSet,
                                   integrals: IntegralSet,
                                   coord: int) -> DerivativeHamiltonian:
    """dH/dx in the current MO basis: explicit terms minus the response
    anticommutator with S^(x), plus the nuclear-repulsion derivative."""
    C = integrals.C
    if derivs.n_ao != integrals.n_ao:
        raise ValueError("derivative set and integrals disagree on n_ao")
    h_mo, g_mo, _ = ao_to_mo(integrals)
    S_x = C.T @ derivs.s_x(coord) @ C
    h_x = C.T @ derivs.h_x_ao[coord] @ C
    g_x = transform_two_electron(derivs.g_x_ao[coord], C)
    dh = h_x - 0.5 * _sym_anticommutator_h(S_x, h_mo)
    dg = g_x - 0.5 * _sym_anticommutator_g(S_x, g_mo)
    return DerivativeHamiltonian(dh, dg, float(derivs.de_nuc[coord]),
                                 derivs.labels[coord])


def mo_half_derivative(derivs: DerivativeIntegralSet, C: np.ndarray,
                       coord: int) -> np.ndarray:
    """(d_x p | q) over MOs from the AO half-derivative overlap."""
    return C.T @ derivs.T_half[coord] @ C


# ---------------------------------------------------------------------------
# effective RDMs
# ---------------------------------------------------------------------------

def effective_rdm_correction(gamma_sa_full: np.ndarray,
                             Gamma_sa_full: np.ndarray,
                             kappa_bar_mat: np.ndarray):
    """Orbital-response corrections to the (transition) RDMs.

    gamma~_pq = sum_o (gamma^SA_oq kbar_op + gamma^SA_po kbar_oq), and the
    four-index analogue, with kbar the full antisymmetric multiplier matrix.
    """
    k = kappa_bar_mat
    gamma_t = (np.einsum("oq,op->pq", gamma_sa_full, k, optimize=True)
               + np.einsum("po,oq->pq", gamma_sa_full, k, optimize=True))
    Gamma_t = (np.einsum("oqrs,op->pqrs", Gamma_sa_full, k, optimize=True)
               + np.einsum("pors,oq->pqrs", Gamma_sa_full, k, optimize=True)
               + np.einsum("pqos,or->pqrs", Gamma_sa_full, k, optimize=True)
               + np.einsum("pqro,os->pqrs", Gamma_sa_full, k, optimize=True))
    return gamma_t, Gamma_t


# ---------------------------------------------------------------------------
# assembled response context
# ---------------------------------------------------------------------------

class ResponseContext:
    """Everything the gradient/NAC formulas need at a converged result."""

    def __init__(self, result, hessian_method: str = "direct"):
        from .savqe import SAOOVQEResult  # local import to avoid a cycle
        if not isinstance(result, SAOOVQEResult):
            raise TypeError("ResponseContext needs a SAOOVQEResult")
        if not np.isfinite(result.phi):
            raise ValueError("result lacks a resolution angle phi")
        self.hessian_method = hessian_method
        self.result = result
        self.integrals = result.integrals
        self.partition = result.integrals.partition
        self.config = result.config
        self.ctx = result.context()
        self.compiled = self.ctx.compiled
        self.pairs = nonredundant_pairs(self.partition,
                                        result.config.include_active_active)
        self.h_mo, self.g_mo, _ = ao_to_mo(self.integrals)
        self.hamiltonian = result.hamiltonian()
        self.qubit_h = self.hamiltonian.to_qubit()
        self.n_active = self.hamiltonian.n_active
        self.references = (self.ctx.rotated_reference(result.phi),
                           self.ctx.rotated_reference(result.phi + 0.5 * np.pi))
        self.states = tuple(self.compiled.apply(result.theta, r)
                            for r in self.references)
        self.energies = tuple(expectation(s, self.qubit_h).real
                              for s in self.states)
        self.rdms = tuple(measure_rdms(s, self.n_active, f"state-{i}")
                          for i, s in enumerate(self.states))
        self.sa_rdms = average_rdms(list(self.rdms), list(self.config.weights))
        self.gamma_sa_full, self.Gamma_sa_full = complete_rdms(
            self.sa_rdms.gamma, self.sa_rdms.Gamma, self.partition)
        self._hessian_blocks = None
        self.counts = MeasurementCounts()

    # -- Hessian blocks (shared by gradient and NAC solves) ----------------

    def hessian_blocks(self):
        if self._hessian_blocks is None:
            h_oo = orbital_hessian(self.gamma_sa_full, self.Gamma_sa_full,
                                   self.h_mo, self.g_mo, self.pairs)
            h_cc, counts_cc = circuit_hessian(
                self.compiled, self.result.theta, self.references,
                self.config.weights, self.qubit_h,
                method=self.hessian_method)
            h_co, counts_co = circuit_orbital_hessian(
                self.compiled, self.result.theta, self.references,
                self.config.weights, self.h_mo, self.g_mo, self.partition,
                self.pairs)
            self.counts = MeasurementCounts(
                hcc_entries=counts_cc.hcc_entries,
                hco_rows=counts_co.hco_rows,
                hcc_evaluations=counts_cc.hcc_evaluations,
                hco_state_preparations=counts_co.hco_state_preparations)
            self._hessian_blocks = (h_oo, h_co, h_cc)
        return self._hessian_blocks

    # -- right-hand sides ---------------------------------------------------

    def state_rdms_full(self, index: int):
        r = self.rdms[index]
        return complete_rdms(r.gamma, r.Gamma, self.partition)

    def orbital_gradient_state(self, index: int) -> np.ndarray:
        gamma_full, Gamma_full = self.state_rdms_full(index)
        return sa_orbital_gradient_vector(gamma_full, Gamma_full,
                                          self.h_mo, self.g_mo, self.pairs)

    def circuit_gradient_state(self, index: int,
                               op: PauliSum | None = None) -> np.ndarray:
        op = self.qubit_h if op is None else op
        counter = [0]
        g = shift_gradient(self.compiled, self.result.theta,
                           self.references[index], op, counter)
        return g

    def transition_rdms(self, i: int, j: int):
        return measure_transition_rdms(self.states[i], self.states[j],
                                       self.n_active, f"transition-{i}{j}")

    def interstate_orbital_gradient(self, i: int, j: int) -> np.ndarray:
        """G^{O,IJ}_pq = <Psi_I| dH/dkappa_pq |Psi_J> over the pairs."""
        t = self.transition_rdms(i, j)
        gamma_full, Gamma_full = complete_rdms(t.gamma, t.Gamma,
                                               self.partition,
                                               overlap=t.overlap)
        return sa_orbital_gradient_vector(gamma_full, Gamma_full,
                                          self.h_mo, self.g_mo, self.pairs)

    # -- coupled-perturbed systems -------------------------------------------

    def solve_gradient_multipliers(self, index: int) -> ResponseSystem:
        h_oo, h_co, h_cc = self.hessian_blocks()
        system = ResponseSystem(
            h_oo=h_oo, h_cc=h_cc, h_co=h_co, pairs=self.pairs,
            g_o=self.orbital_gradient_state(index),
            g_c=self.circuit_gradient_state(index),
            counts=self.counts)
        system.solve()
        return system

    def solve_nac_multipliers(self, i: int, j: int) -> ResponseSystem:
        h_oo, h_co, h_cc = self.hessian_blocks()
        system = ResponseSystem(
            h_oo=h_oo, h_cc=h_cc, h_co=h_co, pairs=self.pairs,
            g_o=self.interstate_orbital_gradient(i, j),
            g_c=np.zeros(self.compiled.n_params),
            phi_bar=-0.25,
            counts=self.counts)
        system.solve()
        return system

    # -- dH/dx pieces --------------------------------------------------------

    def derivative_hamiltonians(self, derivs: DerivativeIntegralSet):
        return [hamiltonian_nuclear_derivative(derivs, self.integrals, k)
                for k in range(derivs.n_coords)]

    def folded_derivative_operator(self, dh: DerivativeHamiltonian) -> PauliSum:
        """Active-space qubit image of dH/dx (for circuit gradients)."""
        ah = fold_frozen_core(dh.dh_mo, dh.dg_mo, dh.de_nuc, self.partition,
                              self.integrals.n_elec)
        return ah.to_qubit()


# ---------------------------------------------------------------------------
# analytic gradient and NAC
# ---------------------------------------------------------------------------

@dataclass
class GradientResult:
    labels: tuple[str, ...]
    values: np.ndarray
    state: int
    multiplier_norms: dict
    counts: MeasurementCounts


@dataclass
class BranchingVectors:
    """NAC with its CI/CSF split plus the two state gradients.

    ``nac = ci_term + csf_term`` exactly; ``h_vec`` is the derivative
    coupling (E_J - E_I) * ci_term, finite at degeneracies; ``g_diff`` is
    the gradient difference dE_J/dx - dE_I/dx.
    """

    labels: tuple[str, ...]
    nac: np.ndarray
    ci_term: np.ndarray
    csf_term: np.ndarray
    h_vec: np.ndarray
    grad_i: np.ndarray
    grad_j: np.ndarray
    gap: float
    multiplier_norms: dict
    counts: MeasurementCounts

    @property
    def g_diff(self) -> np.ndarray:
        return 0.5 * (self.grad_j - self.grad_i)


def _response_term(rc: ResponseContext, theta_bar: np.ndarray,
                   dh_op: PauliSum) -> float:
    """sum_K sum_n w_K theta_bar_n G^{C,K}_n(dH/dx) over the ensemble."""
    total = 0.0
    for w, ref in zip(rc.config.weights, rc.references):
        g = shift_gradient(rc.compiled, rc.result.theta, ref, dh_op)
        total += w * float(theta_bar @ g)
    return total


def analytic_gradient(result, state: int,
                      derivs: DerivativeIntegralSet,
                      rc: ResponseContext | None = None) -> GradientResult:
    """dE_I/dx for the resolved state I via the stationary Lagrangian.

    Contracts the derivative integrals with the effective RDMs
    (state RDMs plus the kappa-multiplier correction of the SA RDMs), adds
    the nuclear-repulsion derivative and the ensemble circuit-response
    term.
    """
    rc = rc or ResponseContext(result)
    system = rc.solve_gradient_multipliers(state)
    kbar_mat = kappa_matrix(rc.pairs, system.kappa_bar,
                            rc.partition.n_orb)
    gamma_full, Gamma_full = rc.state_rdms_full(state)
    gamma_t, Gamma_t = effective_rdm_correction(rc.gamma_sa_full,
                                                rc.Gamma_sa_full, kbar_mat)
    gamma_eff = gamma_full + gamma_t
    Gamma_eff = Gamma_full + Gamma_t
    values = np.zeros(derivs.n_coords)
    for k, dh in enumerate(rc.derivative_hamiltonians(derivs)):
        val = contract_energy(dh.dh_mo, dh.dg_mo, gamma_eff, Gamma_eff)
        val += dh.de_nuc
        val += _response_term(rc, system.theta_bar,
                              rc.folded_derivative_operator(dh))
        values[k] = val
    norms = {"kappa_bar": float(np.linalg.norm(system.kappa_bar)),
             "theta_bar": float(np.linalg.norm(system.theta_bar)),
             "residual": system.residual}
    return GradientResult(derivs.labels, values, state, norms, rc.counts)


def analytic_nac(result, i: int, j: int, derivs: DerivativeIntegralSet,
                 rc: ResponseContext | None = None,
                 gap_threshold: float = 1e-8) -> BranchingVectors:
    """Non-adiabatic coupling D_IJ between resolved states i and j.

    The CI term is the off-diagonal Hellmann-Feynman contraction with
    effective transition RDMs plus the ensemble response term, divided by
    the gap; the CSF term contracts the transition 1-RDM with the
    antisymmetrized MO half-derivative overlap.  Below ``gap_threshold``
    a DegenerateGapError carrying the finite numerator is raised.
    """
    rc = rc or ResponseContext(result)
    system = rc.solve_nac_multipliers(i, j)
    kbar_mat = kappa_matrix(rc.pairs, system.kappa_bar, rc.partition.n_orb)
    t = rc.transition_rdms(i, j)
    gamma_full, Gamma_full = complete_rdms(t.gamma, t.Gamma, rc.partition,
                                           overlap=t.overlap)
    gamma_t, Gamma_t = effective_rdm_correction(rc.gamma_sa_full,
                                                rc.Gamma_sa_full, kbar_mat)
    gamma_eff = gamma_full + gamma_t
    Gamma_eff = Gamma_full + Gamma_t
    gap = rc.energies[j] - rc.energies[i]
    numerator = np.zeros(derivs.n_coords)
    csf = np.zeros(derivs.n_coords)
    act = list(range(rc.partition.n_orb))
    for k, dh in enumerate(rc.derivative_hamiltonians(derivs)):
        num = contract_energy(dh.dh_mo, dh.dg_mo, gamma_eff, Gamma_eff)
        num += dh.de_nuc * t.overlap
        num += _response_term(rc, system.theta_bar,
                              rc.folded_derivative_operator(dh))
        numerator[k] = num
        D = mo_half_derivative(derivs, rc.integrals.C, k)
        A = D - D.T
        csf[k] = -0.5 * float(np.einsum("pq,pq->", gamma_full[np.ix_(act, act)],
                                        A[np.ix_(act, act)]))
    norms = {"kappa_bar": float(np.linalg.norm(system.kappa_bar)),
             "theta_bar": float(np.linalg.norm(system.theta_bar)),
             "phi_bar": -0.25,
             "residual": system.residual}
    if abs(gap) < gap_threshold:
        raise DegenerateGapError(gap, numerator, csf, derivs.labels)
    ci = numerator / gap
    grad_i = analytic_gradient(result, i, derivs, rc).values
    grad_j = analytic_gradient(result, j, derivs, rc).values
    return BranchingVectors(
        labels=derivs.labels, nac=ci + csf, ci_term=ci, csf_term=csf,
        h_vec=numerator, grad_i=grad_i, grad_j=grad_j, gap=float(gap),
        multiplier_norms=norms, counts=rc.counts)


def gradient_record(res: GradientResult) -> dict:
    """JSON-ready record of a gradient evaluation."""
    return {
        "type": "gradient",
        "state": res.state,
        "coordinates": list(res.labels),
        "values": [float(v) for v in res.values],
        "multiplier_norms": res.multiplier_norms,
        "evaluation_counts": counts_record(res.counts),
    }


def nac_record(bv: BranchingVectors) -> dict:
    return {
        "type": "nac",
        "coordinates": list(bv.labels),
        "values": [float(v) for v in bv.nac],
        "ci_term": [float(v) for v in bv.ci_term],
        "csf_term": [float(v) for v in bv.csf_term],
        "derivative_coupling": [float(v) for v in bv.h_vec],
        "gap": bv.gap,
        "multiplier_norms": bv.multiplier_norms,
        "evaluation_counts": counts_record(bv.counts),
    }


def counts_record(counts: MeasurementCounts | None) -> dict:
    if counts is None:
        return {}
    return {
        "hcc_entries": counts.hcc_entries,
        "hco_rows": counts.hco_rows,
        "hcc_paper_total": counts.hcc_paper_total,
        "hco_paper_total": counts.hco_paper_total,
        "hco_appendix_total": counts.hco_appendix_total,
        "hcc_evaluations": counts.hcc_evaluations,
        "hco_state_preparations": counts.hco_state_preparations,
    }
