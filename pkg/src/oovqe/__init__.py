"""State-averaged orbital-optimized VQE with analytic derivatives.

Exact-statevector SA-OO-VQE engine with coupled-perturbed analytic
nuclear gradients and non-adiabatic couplings, plus conical-intersection
geometry drivers.  See README.md for an overview and the CLI entry point.
"""

from .ansatz import (CIS, HF, CompiledAnsatz, Rotated, build_ansatz,
                     enumerate_doubles, doubles_index_map, prepare_reference,
                     rotation_circuit)
from .fermion import (ActiveHamiltonian, FermionOperator, exact_subspace_oracle,
                      jordan_wigner, spin_free_excitation,
                      spin_free_pair_excitation)
from .geometry import (GeometrySpec, build_formaldimine, ci_search_2d,
                       internal_jacobian, meci_search, pes_scan)
from .integrals import (DerivativeIntegralSet, IntegralSet, OrbitalPartition,
                        active_hamiltonian, ao_to_mo, fold_frozen_core,
                        parse_derivdump, parse_fcidump, write_derivdump,
                        write_fcidump)
from .measure import RDMSet, measure_rdms, measure_transition_rdms
from .models import get_model, model_system
from .pauli import PauliString, PauliSum
from .response import (BranchingVectors, DegenerateGapError, ResponseContext,
                       analytic_gradient, analytic_nac, circuit_hessian,
                       hamiltonian_nuclear_derivative, shift_gradient)
from .savqe import (EnsembleConfig, SAOOVQEResult, optimize_circuit,
                    resolve_states, run_sa_oo_vqe, sa_energy)
from .statevector import (Gate, StateVector, apply_gate,
                          apply_pauli_exponential, expectation,
                          transition_element)

__version__ = "0.1.0"
