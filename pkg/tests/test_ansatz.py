import itertools

import numpy as np
import pytest
import scipy.linalg

from oovqe.ansatz import (CIS, HF, CompiledAnsatz, Rotated,
                          ROTATION_CIRCUIT_DEPTH, ansatz_depth_paper_convention,
                          ansatz_factor_count, build_ansatz, doubles_index_map,
                          enumerate_doubles, prepare_reference,
                          rotation_circuit)
from oovqe.fermion import number_operator, sz_operator
from oovqe.statevector import StateVector, expectation

import oracles


def fock_matrix_of(op_apply, n_modes):
    """Matrix of a fermionic operator from its action on determinants."""
    dim = 2 ** n_modes
    M = np.zeros((dim, dim))
    for det in range(dim):
        for d, c in op_apply({det: 1.0}).items():
            M[d, det] += c
    return M


def generator_matrix(key, n_active):
    """Dense anti-Hermitian generator via the independent Fock-space action."""
    (t, u), (v, w) = key
    n_modes = 2 * n_active

    def apply_e(state, a, b, c, d):
        # e_{a b c d} = sum_{s,t} adag_{a s} adag_{c t} a_{d t} a_{b s}
        out = {}
        for s in (0, 1):
            for tt in (0, 1):
                tmp = oracles.apply_annihilation(state, 2 * b + s, n_modes)
                tmp = oracles.apply_annihilation(tmp, 2 * d + tt, n_modes)
                tmp = oracles.apply_creation(tmp, 2 * c + tt, n_modes)
                tmp = oracles.apply_creation(tmp, 2 * a + s, n_modes)
                for dd, cc in tmp.items():
                    out[dd] = out.get(dd, 0.0) + cc
        return out

    def apply_gen(state):
        # adag_t adag_v a_w a_u ordering: move annihilations inside
        out = {}
        for s in (0, 1):
            for tt in (0, 1):
                tmp = oracles.apply_annihilation(state, 2 * u + s, n_modes)
                tmp = oracles.apply_annihilation(tmp, 2 * w + tt, n_modes)
                tmp = oracles.apply_creation(tmp, 2 * v + tt, n_modes)
                tmp = oracles.apply_creation(tmp, 2 * t + s, n_modes)
                for dd, cc in tmp.items():
                    out[dd] = out.get(dd, 0.0) + cc
        return out

    M = fock_matrix_of(apply_gen, n_modes)
    return M - M.T


def brute_force_pool_classes(n_active):
    """All index tuples, deduplicated by generator-matrix identity."""
    mats = {}
    for tup in itertools.product(range(n_active), repeat=4):
        key = ((tup[0], tup[1]), (tup[2], tup[3]))
        M = generator_matrix(key, n_active)
        if np.abs(M).max() < 1e-12:
            continue
        for seen_key, seen in mats.items():
            if np.allclose(M, seen, atol=1e-12) or np.allclose(M, -seen,
                                                               atol=1e-12):
                break
        else:
            mats[key] = M
    return mats


class TestEnumerateDoubles:
    def test_paper_count_three_orbitals(self):
        assert len(enumerate_doubles(3)) == 12

    def test_two_orbital_count_matches_brute_force(self):
        # brute force over all 16 index tuples: dedup by matrix identity,
        # drop zero generators, then independence by matrix rank over the
        # full 4-spin-orbital Fock space
        pool = enumerate_doubles(2)
        classes = brute_force_pool_classes(2)
        rank = np.linalg.matrix_rank(
            np.array([m.flatten() for m in classes.values()]), tol=1e-10)
        assert len(pool) == rank == 3

    def test_pool_generators_linearly_independent(self):
        for n in (2, 3):
            pool = enumerate_doubles(n)
            mats = [generator_matrix(g.key, n).flatten() for g in pool]
            assert np.linalg.matrix_rank(np.array(mats), tol=1e-10) == len(pool)

    def test_generators_anti_hermitian(self):
        for gen in enumerate_doubles(3):
            img = gen.qubit_image
            total = img + img.dagger()
            assert all(abs(c) < 1e-12 for c, _ in total.terms)

    def test_jw_image_matches_fock_action(self):
        for gen in enumerate_doubles(2):
            dense_jw = gen.qubit_image.to_matrix()
            dense_fock = generator_matrix(gen.key, 2)
            assert np.abs(dense_jw - dense_fock).max() < 1e-12

    def test_component_factors_commute(self):
        # Pauli strings within one spin channel commute; the contiguous
        # component grouping is what the circuit factorization relies on
        for n in (2, 3):
            for gen in enumerate_doubles(n):
                start = 0
                for size, comp in zip(gen.component_sizes, gen.components):
                    strings = [s for s, _ in gen.factors[start:start + size]]
                    for a in strings:
                        for b in strings:
                            assert a.commutes_with(b)
                    start += size

    def test_pair_double_has_eight_factors(self):
        # true pair doubles decompose into 2^(2n-1) = 8 strings for n = 2
        pool = enumerate_doubles(3)
        for gen in pool:
            (A, B) = gen.key
            if A == B:
                assert len(gen.factors) == 8
                assert gen.all_factors_commute

    def test_index_map_shape(self):
        m = doubles_index_map(3)
        assert len(m) == 12
        assert all(len(v) == 4 for v in m.values())

    def test_too_few_orbitals(self):
        with pytest.raises(ValueError):
            enumerate_doubles(1)


class TestBuildAnsatz:
    def test_zero_theta_identity(self, rng):
        compiled = CompiledAnsatz(3, 4)
        amps = rng.normal(size=64) + 1j * rng.normal(size=64)
        amps /= np.linalg.norm(amps)
        state = StateVector(6, amps)
        out = compiled.apply(np.zeros(compiled.n_params), state)
        assert np.allclose(out.amplitudes, state.amplitudes)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            build_ansatz(3, 4, np.zeros(5))

    def test_single_theta_matches_dense_exponential(self):
        # for generators with mutually commuting factors the circuit equals
        # expm(theta G) exactly; the non-commuting semi-diagonal generators
        # equal the ordered product of their spin-channel exponentials
        # (single Trotter factorization, which is the ansatz definition)
        n_active, n_elec = 3, 4
        compiled = CompiledAnsatz(n_active, n_elec)
        theta_val = 0.37
        for j, gen in enumerate(compiled.pool):
            theta = np.zeros(compiled.n_params)
            theta[j] = theta_val
            ref = prepare_reference(HF(), n_active, n_elec)
            out = compiled.apply(theta, ref).amplitudes
            if gen.all_factors_commute:
                target = scipy.linalg.expm(
                    theta_val * generator_matrix(gen.key, n_active))
                assert np.abs(out - target @ ref.amplitudes).max() < 1e-12
            else:
                prod = np.eye(2 ** (2 * n_active))
                for comp in gen.components:
                    prod = scipy.linalg.expm(
                        theta_val * comp.to_matrix()) @ prod
                assert np.abs(out - prod @ ref.amplitudes).max() < 1e-12

    def test_ordered_factor_list(self):
        listing = build_ansatz(3, 4, 0.1 * np.arange(12))
        assert len(listing) == ansatz_factor_count(3)

    def test_particle_number_and_sz_conserved(self, rng):
        n_active, n_elec = 3, 4
        compiled = CompiledAnsatz(n_active, n_elec)
        theta = rng.normal(scale=0.2, size=compiled.n_params)
        for kind in (HF(), CIS(1, 2)):
            ref = prepare_reference(kind, n_active, n_elec)
            out = compiled.apply(theta, ref)
            n_val = expectation(out, number_operator(n_active))
            sz_val = expectation(out, sz_operator(n_active))
            assert n_val.real == pytest.approx(n_elec, abs=1e-10)
            assert abs(sz_val) < 1e-10


class TestReferenceStates:
    def test_rotated_zero_is_hf(self):
        # CAS(2 orbitals, 2 electrons): Rotated(0) = |1100>
        state = prepare_reference(Rotated(0.0, 0, 1), 2, 2)
        hf = StateVector.from_basis_label("1100")
        assert np.abs(state.amplitudes - hf.amplitudes).max() < 1e-12

    def test_rotated_half_pi_is_cis(self):
        # Rotated(pi/2) = (|0110> - |1001>)/sqrt(2)
        state = prepare_reference(Rotated(np.pi / 2, 0, 1), 2, 2)
        expect = np.zeros(16)
        expect[int("0110", 2)] = 1 / np.sqrt(2)
        expect[int("1001", 2)] = -1 / np.sqrt(2)
        assert np.abs(state.amplitudes - expect).max() < 1e-12

    def test_intermediate_trace(self):
        # cos(phi)|1100> + sin(phi)(|0110> - |1001>)/sqrt(2)
        phi = 0.43
        state = prepare_reference(Rotated(phi, 0, 1), 2, 2)
        expect = np.zeros(16)
        expect[int("1100", 2)] = np.cos(phi)
        expect[int("0110", 2)] = np.sin(phi) / np.sqrt(2)
        expect[int("1001", 2)] = -np.sin(phi) / np.sqrt(2)
        assert np.abs(state.amplitudes - expect).max() < 1e-12

    def test_orthogonal_partner_on_grid(self):
        for phi in np.linspace(0, 2 * np.pi, 16, endpoint=False):
            a = prepare_reference(Rotated(phi, 1, 2), 3, 4)
            b = prepare_reference(Rotated(phi + np.pi / 2, 1, 2), 3, 4)
            assert abs(a.overlap(b)) < 1e-12
            assert a.norm() == pytest.approx(1.0, abs=1e-12)

    def _direct_cis(self, h, l, n_active, n_elec):
        # - E_lh |HF> / sqrt(2) via the independent Fock-space action
        n_modes = 2 * n_active
        hf_det = 0
        for m in range(n_elec):
            hf_det |= 1 << (n_modes - 1 - m)
        state = oracles.apply_excitation({hf_det: 1.0}, l, h, n_modes)
        amps = np.zeros(2 ** n_modes)
        for det, c in state.items():
            amps[det] = -c
        return amps / np.linalg.norm(amps)

    @pytest.mark.parametrize("n_active,n_elec", [(2, 2), (3, 4), (4, 4)])
    def test_rotation_circuit_all_hl_pairs(self, n_active, n_elec):
        # the Fig.-2-style construction generalizes to any (h, l) pair:
        # cos(phi) HF + sin(phi) CIS(h, l) against direct construction
        n_occ = n_elec // 2
        for h in range(n_occ):
            for l in range(n_occ, n_active):
                cis = self._direct_cis(h, l, n_active, n_elec)
                for phi in (0.0, 0.3, np.pi / 2, 2.2):
                    got = prepare_reference(Rotated(phi, h, l),
                                            n_active, n_elec)
                    hf = prepare_reference(HF(), n_active, n_elec)
                    expect = np.cos(phi) * hf.amplitudes + np.sin(phi) * cis
                    assert np.abs(got.amplitudes - expect).max() < 1e-12

    def test_cis_kind_equals_rotated_half_pi(self):
        a = prepare_reference(CIS(1, 2), 3, 4)
        b = prepare_reference(Rotated(np.pi / 2, 1, 2), 3, 4)
        assert np.abs(a.amplitudes - b.amplitudes).max() < 1e-14

    def test_invalid_orbital_indices(self):
        with pytest.raises(ValueError):
            prepare_reference(CIS(1, 1), 3, 4)
        with pytest.raises(ValueError):
            prepare_reference(CIS(2, 2), 3, 4)

    def test_reference_quantum_numbers(self):
        for kind in (HF(), CIS(1, 2), Rotated(0.7, 0, 2)):
            state = prepare_reference(kind, 3, 4)
            assert expectation(state, number_operator(3)).real == pytest.approx(4.0)
            assert abs(expectation(state, sz_operator(3))) < 1e-12


class TestDepthAccounting:
    def test_paper_convention_depth(self):
        # 12 parameters x 4 spin channels x 8 strings x 7 layers per
        # weight-4 Pauli exponential
        assert ansatz_depth_paper_convention(12) == 2688
        assert ROTATION_CIRCUIT_DEPTH == 6

    def test_rotation_circuit_layer_count(self):
        gates = rotation_circuit(0.3, 1, 2, 3, 4)
        # layers: [Ry + X's] [cH] [CNOT] [CNOT] [CNOT] [X + Z]
        kinds = [g.kind for g in gates]
        assert kinds.count("Ry") == 1
        n_two_qubit = sum(1 for g in gates if g.controls)
        assert n_two_qubit == 4

    def test_factor_count_documented(self):
        # the implementation applies one exponential per JW Pauli factor
        assert ansatz_factor_count(3) == 120
        assert ansatz_factor_count(2) == 24
