import numpy as np
import pytest

from oovqe.fermion import (ActiveHamiltonian, FermionOperator, SectorError,
                           exact_subspace_oracle, jordan_wigner,
                           number_operator, sector_indices, spin_free_excitation,
                           spin_free_pair_excitation, sz_operator)
from oovqe.statevector import StateVector, expectation

from conftest import random_eightfold, random_symmetric
from oracles import ci_eigensystem


def mode_matrix(mode, creation, n_modes):
    op = FermionOperator.single(1.0, ((mode, creation),))
    return jordan_wigner(op, n_modes).to_matrix()


class TestSpinFreeOperators:
    def test_number_eigenvalue_doubly_occupied(self):
        # E_pp on a determinant with orbital p doubly occupied -> 2
        n_active = 2
        e_pp = jordan_wigner(spin_free_excitation(0, 0, n_active), 4)
        hf = StateVector.from_basis_label("1100")
        assert expectation(hf, e_pp).real == pytest.approx(2.0)

    def test_pair_operator_diagonal_eigenvalue(self):
        # e_pppp on doubly occupied p: n_p (n_p - 1) = 2, checked against
        # enumeration of the 4-spin-orbital Fock space
        n_active = 2
        e = jordan_wigner(spin_free_pair_excitation(0, 0, 0, 0, n_active), 4)
        dense = e.to_matrix()
        for b in range(16):
            occ_up = (b >> 3) & 1
            occ_dn = (b >> 2) & 1
            n_p = occ_up + occ_dn
            assert dense[b, b].real == pytest.approx(n_p * (n_p - 1))
        hf = StateVector.from_basis_label("1100")
        assert expectation(hf, e).real == pytest.approx(2.0)

    def test_hf_brillouin_orthogonality(self):
        n_active = 2
        e_hl = jordan_wigner(spin_free_excitation(1, 0, n_active), 4)
        hf = StateVector.from_basis_label("1100")
        assert abs(expectation(hf, e_hl)) < 1e-14

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            spin_free_excitation(0, 3, 2)
        with pytest.raises(IndexError):
            spin_free_pair_excitation(0, 1, 2, 3, 2)

    def test_normal_order_unique(self):
        a = FermionOperator.single(1.0, ((0, False), (1, True)))
        b = FermionOperator.single(-1.0, ((1, True), (0, False)))
        assert a.isclose(b)


class TestJordanWigner:
    def test_single_mode_textbook(self):
        ps = jordan_wigner(FermionOperator.single(1.0, ((0, True),)), 1)
        terms = {s.ops: c for c, s in ps.terms}
        assert terms["X"] == pytest.approx(0.5)
        assert terms["Y"] == pytest.approx(-0.5j)

    def test_number_operator_image(self):
        ps = jordan_wigner(
            FermionOperator.single(1.0, ((0, True), (0, False))), 1)
        terms = {s.ops: c for c, s in ps.terms}
        assert terms["I"] == pytest.approx(0.5)
        assert terms["Z"] == pytest.approx(-0.5)

    def test_anticommutation_relations(self):
        n = 6
        eye = np.eye(2 ** n)
        for i in range(n):
            for j in range(n):
                ai = mode_matrix(i, False, n)
                adj = mode_matrix(j, True, n)
                anti = ai @ adj + adj @ ai
                expect = eye if i == j else 0.0 * eye
                assert np.abs(anti - expect).max() < 1e-14
                aj = mode_matrix(j, False, n)
                assert np.abs(ai @ aj + aj @ ai).max() < 1e-14

    def test_spectrum_matches_determinant_ci(self, rng):
        # full 4-spin-orbital Hamiltonian: JW spectrum in every (N, Sz)
        # sector equals the independent determinant-basis CI oracle
        n_active = 2
        h = random_symmetric(rng, n_active)
        g = random_eightfold(rng, n_active)
        ah = ActiveHamiltonian(h, g, 0.0, n_active, 2)
        dense = ah.to_qubit().to_matrix()
        idx = sector_indices(n_active, 2, 0)
        jw_vals = np.linalg.eigvalsh(dense[np.ix_(idx, idx)].real)
        ci_vals, _, _ = ci_eigensystem(h, g, 0.0, n_active, 2)
        assert np.allclose(jw_vals, ci_vals, atol=1e-12)


class TestActiveHamiltonian:
    def test_hermiticity(self, rng):
        ah = ActiveHamiltonian(random_symmetric(rng, 2),
                               random_eightfold(rng, 2), 0.2, 2, 2)
        q = ah.to_qubit()
        assert q.is_hermitian()
        dagger = q.dagger()
        diff = q - dagger
        assert all(abs(c) < 1e-14 for c, _ in diff.terms)

    def test_particle_number_commutes(self, rng):
        ah = ActiveHamiltonian(random_symmetric(rng, 2),
                               random_eightfold(rng, 2), 0.0, 2, 2)
        comm = ah.to_qubit().commutator(number_operator(2))
        assert comm.n_terms == 0

    def test_sz_commutes(self, rng):
        ah = ActiveHamiltonian(random_symmetric(rng, 3),
                               random_eightfold(rng, 3), 0.0, 3, 4)
        comm = ah.to_qubit().commutator(sz_operator(3))
        assert comm.n_terms == 0

    def test_asymmetric_integrals_rejected(self, rng):
        h = rng.normal(size=(2, 2))
        with pytest.raises(ValueError):
            ActiveHamiltonian(h + 0.5, random_eightfold(rng, 2), 0.0, 2, 2)


class TestExactSubspaceOracle:
    def test_noninteracting_limit(self):
        # two-orbital, two-electron, g = 0: ground energy is twice the
        # lowest h eigenvalue
        h = np.diag([-1.3, 0.4])
        g = np.zeros((2, 2, 2, 2))
        ah = ActiveHamiltonian(h, g, 0.0, 2, 2)
        states = exact_subspace_oracle(ah, 1)
        assert states[0][0] == pytest.approx(-2.6)

    def test_matches_determinant_ci(self, rng, model, cas43):
        ints = model.integral_set([1.0 - 0.3, 0.2])  # x = 0.7 in model units
        from oovqe.integrals import ao_to_mo, fold_frozen_core
        h_mo, g_mo, _ = ao_to_mo(ints)
        ah = fold_frozen_core(h_mo, g_mo, ints.e_nuc, ints.partition,
                              ints.n_elec)
        states = exact_subspace_oracle(ah, 4)
        ci_vals, _, _ = ci_eigensystem(ah.h_eff, ah.g_act, ah.e_core, 3, 4,
                                       n_states=4)
        for k in range(4):
            assert states[k][0] == pytest.approx(ci_vals[k], abs=1e-12)

    def test_degenerate_decoupled_sites(self):
        # two identical decoupled sites: doubly degenerate ground state
        h = np.diag([-1.0, -1.0])
        g = np.zeros((2,) * 4)
        g[0, 0, 0, 0] = g[1, 1, 1, 1] = 0.3
        ah = ActiveHamiltonian(h, g, 0.0, 2, 2)
        states = exact_subspace_oracle(ah, 3)
        assert abs(states[0][0] - states[1][0]) < 1e-12

    def test_sector_errors(self, rng):
        ah = ActiveHamiltonian(random_symmetric(rng, 2),
                               random_eightfold(rng, 2), 0.0, 2, 2)
        with pytest.raises(SectorError):
            exact_subspace_oracle(ah, 100)
        bad = ActiveHamiltonian(ah.h_eff, ah.g_act, 0.0, 2, 5)
        with pytest.raises(SectorError):
            exact_subspace_oracle(bad, 1)

    def test_eigenvectors_satisfy_schroedinger(self, rng):
        ah = ActiveHamiltonian(random_symmetric(rng, 2),
                               random_eightfold(rng, 2), 0.1, 2, 2)
        dense = ah.to_qubit().to_matrix()
        for e, vec in exact_subspace_oracle(ah, 2):
            resid = dense @ vec.amplitudes - e * vec.amplitudes
            assert np.abs(resid).max() < 1e-12
