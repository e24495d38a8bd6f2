import os

import numpy as np
import pytest

from oovqe.fermion import exact_subspace_oracle
from oovqe.integrals import (FormatError, DerivativeIntegralSet, IntegralSet,
                             OrbitalPartition, active_hamiltonian, ao_to_mo,
                             fold_frozen_core, lowdin_core_guess,
                             parse_derivdump, parse_fcidump,
                             transform_two_electron, write_derivdump,
                             write_fcidump)
from oovqe.models import CROSSING3_DEGENERACY, get_model, model_system

from conftest import random_eightfold, random_symmetric
from oracles import ci_eigensystem, naive_two_electron_transform, rdm_from_ci


class TestFcidump:
    def test_scalar_only(self, tmp_path):
        path = tmp_path / "scalar.fcidump"
        path.write_text(" &FCI NORB=1,NELEC=2,MS2=0,\n &END\n"
                        "0.75 0 0 0 0\n")
        h, g, e_core, n_orb, n_elec = parse_fcidump(path)
        assert e_core == 0.75
        assert n_orb == 1 and n_elec == 2
        assert np.all(h == 0.0) and np.all(g == 0.0)

    def test_symmetry_completion(self, tmp_path):
        path = tmp_path / "g.fcidump"
        path.write_text(" &FCI NORB=2,NELEC=2,MS2=0,\n &END\n"
                        "0.75 1 1 1 1\n0.25 1 2 1 2\n")
        h, g, *_ = parse_fcidump(path)
        assert g[0, 0, 0, 0] == 0.75
        for idx in ((0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 0), (1, 0, 1, 0)):
            assert g[idx] == 0.25

    def test_round_trip_bit_identical(self, rng, tmp_path):
        n = 3
        h = random_symmetric(rng, n)
        g = random_eightfold(rng, n)
        path = tmp_path / "rt.fcidump"
        write_fcidump(path, h, g, -1.234567890123456, 4)
        h2, g2, e2, n2, nelec2 = parse_fcidump(path)
        assert n2 == n and nelec2 == 4
        assert e2 == -1.234567890123456
        assert np.array_equal(h, h2)
        assert np.array_equal(g, g2)

    def test_contradictory_duplicate(self, tmp_path):
        path = tmp_path / "dup.fcidump"
        path.write_text(" &FCI NORB=1,NELEC=2,MS2=0,\n &END\n"
                        "0.5 1 1 0 0\n0.6 1 1 0 0\n")
        with pytest.raises(FormatError):
            parse_fcidump(path)

    def test_equal_duplicate_tolerated(self, tmp_path):
        path = tmp_path / "dup2.fcidump"
        path.write_text(" &FCI NORB=1,NELEC=2,MS2=0,\n &END\n"
                        "0.5 1 1 0 0\n0.5 1 1 0 0\n")
        h, *_ = parse_fcidump(path)
        assert h[0, 0] == 0.5

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.fcidump"
        path.write_text("0.5 1 1 0 0\n")
        with pytest.raises(FormatError):
            parse_fcidump(path)

    def test_index_out_of_range(self, tmp_path):
        path = tmp_path / "oob.fcidump"
        path.write_text(" &FCI NORB=1,NELEC=2,MS2=0,\n &END\n0.5 2 1 0 0\n")
        with pytest.raises(FormatError):
            parse_fcidump(path)


class TestDerivdump:
    def _write_parse(self, tmp_path, derivs):
        path = tmp_path / "d.derivdump"
        write_derivdump(path, derivs)
        return parse_derivdump(path)

    def test_all_zero_file(self, tmp_path):
        path = tmp_path / "zero.derivdump"
        path.write_text("DERIVDUMP NAO=2 NCOORDS=1\n"
                        "COORD 1 x\nTHALF\nEND\nHX\nEND\nGX\nEND\n"
                        "DENUC\nEND\nENDCOORD\n")
        d = parse_derivdump(path)
        assert np.all(d.T_half == 0) and np.all(d.h_x_ao == 0)
        assert np.all(d.g_x_ao == 0) and np.all(d.de_nuc == 0)

    def test_denuc_only(self, tmp_path):
        path = tmp_path / "dn.derivdump"
        path.write_text("DERIVDUMP NAO=1 NCOORDS=1\n"
                        "COORD 1 x\nTHALF\nEND\nHX\nEND\nGX\nEND\n"
                        "DENUC\n0.5\nEND\nENDCOORD\n")
        d = parse_derivdump(path)
        assert d.de_nuc[0] == 0.5

    def test_missing_block(self, tmp_path):
        path = tmp_path / "mb.derivdump"
        path.write_text("DERIVDUMP NAO=1 NCOORDS=1\n"
                        "COORD 1 x\nTHALF\nEND\nGX\nEND\n"
                        "DENUC\nEND\nENDCOORD\n")
        with pytest.raises(FormatError):
            parse_derivdump(path)

    def test_index_overflow(self, tmp_path):
        path = tmp_path / "ov.derivdump"
        path.write_text("DERIVDUMP NAO=1 NCOORDS=1\n"
                        "COORD 1 x\nTHALF\n0.5 2 1\nEND\nHX\nEND\nGX\nEND\n"
                        "DENUC\nEND\nENDCOORD\n")
        with pytest.raises(FormatError):
            parse_derivdump(path)

    def test_model_export_round_trip(self, model, tmp_path):
        derivs = model.derivative_set([0.3, 0.2])
        got = self._write_parse(tmp_path, derivs)
        assert got.labels == derivs.labels
        assert np.array_equal(got.T_half, derivs.T_half)
        assert np.array_equal(got.h_x_ao, derivs.h_x_ao)
        assert np.array_equal(got.g_x_ao, derivs.g_x_ao)
        assert np.array_equal(got.de_nuc, derivs.de_nuc)

    def test_sx_symmetric(self, model):
        derivs = model.derivative_set([0.1, -0.2])
        for k in range(derivs.n_coords):
            sx = derivs.s_x(k)
            assert np.allclose(sx, sx.T)


class TestAoToMo:
    def test_identity_transform(self, rng):
        n = 3
        h = random_symmetric(rng, n)
        g = random_eightfold(rng, n)
        ints = IntegralSet(np.eye(n), h, g, np.eye(n), 0.0, 2,
                           OrbitalPartition.cas(n, 0, n))
        h_mo, g_mo, S_mo = ao_to_mo(ints)
        assert np.allclose(h_mo, h) and np.allclose(g_mo, g)
        assert np.allclose(S_mo, np.eye(n))

    def test_permutation_relabels(self, rng):
        n = 3
        h = random_symmetric(rng, n)
        g = random_eightfold(rng, n)
        P = np.eye(n)[:, [2, 0, 1]]
        ints = IntegralSet(np.eye(n), h, g, P, 0.0, 2,
                           OrbitalPartition.cas(n, 0, n))
        h_mo, g_mo, _ = ao_to_mo(ints)
        perm = [2, 0, 1]
        for p in range(n):
            for q in range(n):
                assert h_mo[p, q] == pytest.approx(h[perm[p], perm[q]])
        assert g_mo[0, 1, 2, 0] == pytest.approx(g[2, 0, 1, 2])

    def test_matches_naive_quadruple_loop(self, rng):
        n = 3
        g = random_eightfold(rng, n)
        M = rng.normal(size=(n, n))
        C, _ = np.linalg.qr(M)
        fast = transform_two_electron(g, C)
        slow = naive_two_electron_transform(g, C)
        assert np.allclose(fast, slow, atol=1e-12)

    def test_orthonormality_enforced(self, rng):
        n = 2
        with pytest.raises(ValueError):
            IntegralSet(np.eye(n), random_symmetric(rng, n),
                        random_eightfold(rng, n), 2 * np.eye(n), 0.0, 2,
                        OrbitalPartition.cas(n, 0, n))


class TestFoldFrozenCore:
    def test_empty_frozen_set(self, rng):
        n = 3
        h = random_symmetric(rng, n)
        g = random_eightfold(rng, n)
        part = OrbitalPartition.cas(n, 0, n)
        ah = fold_frozen_core(h, g, 0.7, part, 4)
        assert np.allclose(ah.h_eff, h)
        assert ah.e_core == pytest.approx(0.7)
        assert ah.n_elec_active == 4

    def test_noninteracting_core(self, rng):
        n = 3
        h = random_symmetric(rng, n)
        g = np.zeros((n,) * 4)
        part = OrbitalPartition.cas(n, 1, 2)
        ah = fold_frozen_core(h, g, 1.0, part, 4)
        assert ah.e_core == pytest.approx(1.0 + 2 * h[0, 0])
        assert np.allclose(ah.h_eff, h[1:, 1:])

    def test_matches_restricted_determinant_ci(self, rng):
        # folding identity: active CI + e_core equals the full CI restricted
        # to determinants with the frozen orbital doubly occupied
        n = 3
        h = random_symmetric(rng, n)
        g = random_eightfold(rng, n, scale=0.2)
        part = OrbitalPartition.cas(n, 1, 2)
        ah = fold_frozen_core(h, g, 0.3, part, 4)
        active_vals, _, _ = ci_eigensystem(ah.h_eff, ah.g_act, ah.e_core, 2, 2)
        restricted_vals, _, _ = ci_eigensystem(h, g, 0.3, n, 4, frozen=(0,))
        assert np.allclose(active_vals, restricted_vals, atol=1e-11)

    def test_oracle_route_agrees(self, rng):
        n = 3
        h = random_symmetric(rng, n)
        g = random_eightfold(rng, n, scale=0.2)
        part = OrbitalPartition.cas(n, 1, 2)
        ah = fold_frozen_core(h, g, 0.0, part, 4)
        states = exact_subspace_oracle(ah, 2)
        vals, _, _ = ci_eigensystem(h, g, 0.0, n, 4, frozen=(0,), n_states=2)
        assert states[0][0] == pytest.approx(vals[0], abs=1e-11)
        assert states[1][0] == pytest.approx(vals[1], abs=1e-11)


class TestModelSystem:
    def test_registry(self):
        with pytest.raises(KeyError):
            get_model("nope")
        ints, derivs = model_system("crossing3", [0.2, 0.1])
        assert ints.n_ao == 3 and derivs.n_coords == 2

    def test_domain_enforced(self, model):
        with pytest.raises(ValueError):
            model.integral_set([5.0, 0.0])

    def test_analytic_derivatives_match_fd(self, model):
        p0 = np.array([0.31, 0.27])
        eps = 1e-5
        derivs = model.derivative_set(p0)
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = eps
            Sp, hp, gp, ep = model.ao_integrals(p0 + dp)
            Sm, hm, gm, em = model.ao_integrals(p0 - dp)
            assert np.abs(derivs.s_x(k) - (Sp - Sm) / (2 * eps)).max() < 1e-8
            assert np.abs(derivs.h_x_ao[k] - (hp - hm) / (2 * eps)).max() < 1e-8
            assert np.abs(derivs.g_x_ao[k] - (gp - gm) / (2 * eps)).max() < 1e-8
            assert abs(derivs.de_nuc[k] - (ep - em) / (2 * eps)) < 1e-8

    def test_degeneracy_at_symmetric_point(self, model, degeneracy_point):
        ints = model.integral_set(degeneracy_point)
        states = exact_subspace_oracle(active_hamiltonian(ints), 2)
        assert abs(states[1][0] - states[0][0]) < 1e-12

    def test_overlap_positive_definite(self, model, rng):
        for _ in range(5):
            x = rng.uniform(-0.5, 0.9)
            y = rng.uniform(-0.6, 0.6)
            S, _, _, _ = model.ao_integrals([x, y])
            np.linalg.cholesky(S)  # raises if not SPD

    def test_lowdin_guess_orthonormal(self, model):
        S, h, g, _ = model.ao_integrals([0.4, -0.3])
        C = lowdin_core_guess(S, h)
        assert np.abs(C.T @ S @ C - np.eye(3)).max() < 1e-12

    def test_hellmann_feynman_end_to_end(self, model):
        # dE_exact/dx from FD of the oracle CI energy equals the contraction
        # of exact-CI RDMs with the Appendix-D derivative integrals; this
        # validates the derivative data before any VQE machinery runs
        from oovqe.response import hamiltonian_nuclear_derivative
        from oovqe.orbitals import complete_rdms, contract_energy
        from oovqe.measure import measure_rdms

        p0 = np.array([0.25, 0.3])
        part = OrbitalPartition.cas(3, 0, 3)
        ints = model.integral_set(p0, part)
        ah = active_hamiltonian(ints)
        states = exact_subspace_oracle(ah, 2)
        derivs = model.derivative_set(p0)

        def ci_energy(params, state):
            ii = model.integral_set(params, part)
            return exact_subspace_oracle(active_hamiltonian(ii), 2)[state][0]

        for state in (0, 1):
            rdm = measure_rdms(states[state][1], 3)
            gamma_full, Gamma_full = complete_rdms(rdm.gamma, rdm.Gamma, part)
            for k in range(2):
                dh = hamiltonian_nuclear_derivative(derivs, ints, k)
                analytic = (contract_energy(dh.dh_mo, dh.dg_mo, gamma_full,
                                            Gamma_full) + dh.de_nuc)
                eps = 1e-5
                dp = np.zeros(2)
                dp[k] = eps
                fd = (ci_energy(p0 + dp, state)
                      - ci_energy(p0 - dp, state)) / (2 * eps)
                assert abs(analytic - fd) < 1e-7
