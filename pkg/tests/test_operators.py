import numpy as np
import pytest
from scipy.linalg import expm

from magwalk.lattice import GaugeField, IncommensurateFluxError, LatticeGeometry
from magwalk.dynamics import SpinorField
from magwalk.operators import (COIN, SIGMA_Y, GaplessAtCutError, TimeFrame,
                               bloch_step_operator, build_coin,
                               dense_walk_matrix, effective_hamiltonian,
                               landau_phases, quasienergies, real_space_step,
                               spectral_flow_operator, unitarity_defect,
                               _bloch_parts)

SQ2 = np.sqrt(2.0)


class TestCoin:
    def test_matrix(self):
        C = build_coin()
        assert np.allclose(C, np.array([[1, -1], [1, 1]]) / SQ2, atol=1e-15)
        assert np.allclose(C, expm(-1j * SIGMA_Y * np.pi / 4), atol=1e-15)

    def test_unitarity(self):
        C = build_coin()
        assert np.abs(C @ C.conj().T - np.eye(2)).max() < 1e-15

    def test_angle_addition(self):
        C = build_coin()
        assert np.allclose(C @ C, [[0, -1], [1, 0]], atol=1e-15)


class TestBlochStepOperator:
    def test_zero_field_origin(self):
        W = bloch_step_operator(0, 1, 0.0, 0.0)
        assert np.allclose(W.matrix, [[0, -1], [1, 0]], atol=1e-14)
        assert np.allclose(np.sort(W.quasienergies()), [-np.pi / 2, np.pi / 2])

    def test_dirac_point_zero(self):
        W = bloch_step_operator(0, 1, np.pi / 2, -np.pi / 2)
        assert np.allclose(W.matrix, np.eye(2), atol=1e-14)

    def test_dirac_point_pi(self):
        W = bloch_step_operator(0, 1, np.pi / 2, np.pi / 2)
        assert np.allclose(W.matrix, -np.eye(2), atol=1e-14)
        assert np.allclose(W.quasienergies(), [np.pi, np.pi])

    def test_rejects_non_coprime(self):
        with pytest.raises(ValueError):
            bloch_step_operator(2, 4, 0.0, 0.0)

    @pytest.mark.parametrize("p,q", [(0, 1), (1, 2), (1, 3), (2, 5), (3, 7)])
    def test_unitarity_random_k(self, p, q):
        rng = np.random.RandomState(q)
        for _ in range(6):
            kx = rng.uniform(-np.pi / q, np.pi / q)
            ky = rng.uniform(-np.pi, np.pi)
            for frame in TimeFrame:
                W = bloch_step_operator(p, q, kx, ky, frame)
                assert unitarity_defect(W.matrix) < 1e-12
                assert abs(abs(np.linalg.det(W.matrix)) - 1) < 1e-12

    @pytest.mark.parametrize("p,q", [(0, 1), (1, 3), (2, 5)])
    def test_frame_equivalence(self, p, q):
        rng = np.random.RandomState(3 * q)
        for _ in range(4):
            k = (rng.uniform(-np.pi / q, np.pi / q), rng.uniform(-np.pi, np.pi))
            Es = [np.sort(quasienergies(bloch_step_operator(p, q, *k, f).matrix))
                  for f in TimeFrame]
            assert np.abs(Es[0] - Es[1]).max() < 1e-12
            assert np.abs(Es[0] - Es[2]).max() < 1e-12

    def test_minimal_coupling_identity(self):
        # F S_y is site-diagonal exp(-i sigma_z (ky - A_y)) in the Bloch basis
        p, q, kx, ky = 1, 3, 0.13, 0.57
        coin, sxu, sxd, syu, syd, fu, fd = _bloch_parts(landau_phases(p, q), kx, ky)
        FS = (fu @ fd) @ (syu @ syd)
        B = 2 * np.pi * p / q
        for j in range(q):
            blk = FS[2 * j:2 * j + 2, 2 * j:2 * j + 2]
            ref = np.diag([np.exp(-1j * (ky - B * j)), np.exp(1j * (ky - B * j))])
            assert np.abs(blk - ref).max() < 1e-12


class TestFieldOperator:
    def test_landau_phases(self):
        geo = LatticeGeometry(6, 4)
        gauge = GaugeField.uniform_landau(1, 3, geo)
        up, dn = gauge.field_phases("y")
        x = np.arange(6)[:, None]
        assert np.allclose(up, 2 * np.pi * x / 3 * np.ones((1, 4)))
        assert np.allclose(dn, -2 * np.pi * x / 3 * np.ones((1, 4)))

    def test_landau_x_direction_trivial(self):
        geo = LatticeGeometry(6, 4)
        gauge = GaugeField.uniform_landau(1, 3, geo)
        up, dn = gauge.field_phases("x")
        assert not np.any(up) and not np.any(dn)

    def test_pure_gauge_has_zero_flux(self):
        geo = LatticeGeometry(8, 8)
        rng = np.random.RandomState(0)
        lam = rng.uniform(0, 2 * np.pi, (8, 8))
        gauge = GaugeField.zero(geo).gauge_transformed(lam)
        assert np.abs(gauge.plaquette_flux()).max() < 1e-12

    def test_plaquette_flux_matches_request(self):
        geo = LatticeGeometry(9, 5)
        gauge = GaugeField.uniform_landau(1, 3, geo)
        flux = gauge.plaquette_flux()
        assert np.abs(np.mod(flux - 1 / 3 + 0.5, 1.0) - 0.5).max() < 1e-12

    def test_incommensurate_rejected(self):
        with pytest.raises(IncommensurateFluxError):
            GaugeField.uniform_landau(1, 3, LatticeGeometry(8, 8))
        # open x-axis is fine
        GaugeField.uniform_landau(1, 3, LatticeGeometry(8, 8, bc_x="open"))


class TestRealSpaceStep:
    def test_single_step_distribution(self):
        # spin-up walker at the center, zero field: after C, S_x, C, S_y the
        # amplitude sits on the four diagonal neighbors with weight 1/4,
        # spin-up on the upper two, spin-down on the lower two
        geo = LatticeGeometry(8, 8)
        st = SpinorField.point_source(geo, (4, 4), (1.0, 0.0))
        real_space_step(st, GaugeField.zero(geo))
        a = st.amps
        expected = {
            (5, 5, 0): 0.5, (3, 5, 0): -0.5,
            (5, 3, 1): 0.5, (3, 3, 1): 0.5,
        }
        for idx, val in expected.items():
            assert abs(a[idx] - val) < 1e-14
        assert abs(np.abs(a) ** 2).sum() == pytest.approx(1.0, abs=1e-14)
        mask = np.zeros_like(a, dtype=bool)
        for idx in expected:
            mask[idx] = True
        assert np.abs(a[~mask]).max() < 1e-14

    def test_norm_preserved_on_torus(self):
        geo = LatticeGeometry(6, 6)
        gauge = GaugeField.uniform_landau(1, 3, geo)
        rng = np.random.RandomState(1)
        amps = rng.standard_normal((6, 6, 2)) + 1j * rng.standard_normal((6, 6, 2))
        st = SpinorField(geo, amps / np.linalg.norm(amps))
        for _ in range(50):
            real_space_step(st, gauge, supershift_m=1)
        assert abs(st.norm() - 1.0) < 1e-12
        assert st.leakage == 0.0

    def test_matches_bloch_matrix_on_commensurate_torus(self):
        # plane-wave states built from the 2q-spinor evolve exactly as the
        # Bloch matrix prescribes (independent oracle for the engine)
        geo = LatticeGeometry(6, 6)
        gauge = GaugeField.uniform_landau(1, 3, geo)
        rng = np.random.RandomState(7)
        u = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        u /= np.linalg.norm(u)
        for mx in range(2):
            for my in range(3):
                kx = 2 * np.pi * mx / 6
                ky = 2 * np.pi * my / 6
                v = bloch_step_operator(1, 3, kx, ky).matrix @ u

                def plane(w):
                    amps = np.zeros((6, 6, 2), complex)
                    for xx in range(6):
                        cell, j = divmod(xx, 3)
                        for yy in range(6):
                            amps[xx, yy] = np.exp(1j * (3 * kx * cell + ky * yy)) * w[2 * j:2 * j + 2]
                    return amps / np.linalg.norm(amps)

                st = SpinorField(geo, plane(u))
                real_space_step(st, gauge)
                ref = plane(v)
                ph = np.vdot(ref.ravel(), st.amps.ravel())
                assert np.abs(st.amps - ph / abs(ph) * ref).max() < 1e-12

    def test_open_boundary_leakage_counter(self):
        geo = LatticeGeometry(4, 4, bc_x="open", bc_y="open")
        st = SpinorField.point_source(geo, (3, 2), (1.0, 0.0))
        real_space_step(st, GaugeField.zero(geo))
        assert st.leakage > 0.0

    def test_supershift(self):
        geo = LatticeGeometry(8, 8)
        st = SpinorField.point_source(geo, (4, 4), (1.0, 0.0))
        real_space_step(st, GaugeField.zero(geo), supershift_m=2)
        prob = st.probability()
        assert prob[6, 5] + prob[2, 5] + prob[6, 3] + prob[2, 3] == pytest.approx(1.0)

    def test_gauge_covariance(self):
        # A -> A + grad(lam) with states conjugated by the spin-independent
        # local phase exp(i lam) leaves probabilities and spectra unchanged
        geo = LatticeGeometry(6, 6)
        gauge = GaugeField.uniform_landau(1, 3, geo)
        rng = np.random.RandomState(11)
        lam = rng.uniform(0, 2 * np.pi, (6, 6))
        g2 = gauge.gauge_transformed(lam)
        a0 = rng.standard_normal((6, 6, 2)) + 1j * rng.standard_normal((6, 6, 2))
        a0 /= np.linalg.norm(a0)
        s1 = SpinorField(geo, a0.copy())
        s2 = SpinorField(geo, a0 * np.exp(1j * lam)[:, :, None])
        for _ in range(25):
            real_space_step(s1, gauge)
            real_space_step(s2, g2)
        assert np.abs(s1.probability() - s2.probability()).max() < 1e-10
        e1 = np.sort(quasienergies(dense_walk_matrix(gauge)))
        e2 = np.sort(quasienergies(dense_walk_matrix(g2)))
        assert np.abs(e1 - e2).max() < 1e-10


class TestEffectiveHamiltonian:
    def test_identity(self):
        H = effective_hamiltonian(np.eye(4, dtype=complex))
        assert np.abs(H.matrix).max() < 1e-12

    def test_sigma_y_rotation(self):
        U = expm(-1j * SIGMA_Y * np.pi / 2)
        H = effective_hamiltonian(U)
        assert np.allclose(H.matrix, (np.pi / 2) * SIGMA_Y, atol=1e-12)
        assert np.allclose(np.sort(H.quasienergies), [-np.pi / 2, np.pi / 2])

    def test_roundtrip_at_generic_k(self):
        W = bloch_step_operator(1, 3, 0.11, 0.35).matrix
        for shift in (0.0, 0.9359):
            H = effective_hamiltonian(W, energy_shift=shift)
            assert np.abs(expm(-1j * H.matrix) - W).max() < 1e-10
            assert np.abs(H.matrix - H.matrix.conj().T).max() < 1e-12
            assert H.quasienergies.min() > shift - np.pi
            assert H.quasienergies.max() <= shift + np.pi + 1e-12

    def test_gapless_at_cut(self):
        # W = -I has both eigenvalues on the default branch cut
        with pytest.raises(GaplessAtCutError):
            effective_hamiltonian(-np.eye(2, dtype=complex))
        # shifting the cut into a gap fixes it
        H = effective_hamiltonian(-np.eye(2, dtype=complex), energy_shift=1.0)
        assert np.allclose(np.abs(H.quasienergies), np.pi)


class TestSpectralFlowOperator:
    def test_unitarity_1_3_15(self):
        W = spectral_flow_operator(1, 3, 2 * np.pi / 15, 0.0, 0.1, 0.1, 15)
        assert unitarity_defect(W) < 1e-12

    def test_beta_zero_is_momentum_folding(self):
        s, q, kx, ky = 3, 3, 0.07, 0.1
        E_mod = np.sort(quasienergies(
            spectral_flow_operator(1, q, 0.0, 0.0, kx, ky, s)))
        folded = np.sort(np.concatenate([
            quasienergies(bloch_step_operator(
                1, q, kx + 2 * np.pi * n / (s * q), ky).matrix)
            for n in range(s)]))
        assert np.abs(E_mod - folded).max() < 1e-10

    def test_global_phase(self):
        W0 = spectral_flow_operator(1, 3, 0.0, 0.0, 0.1, 0.1, 3)
        W1 = spectral_flow_operator(1, 3, 0.0, 0.7, 0.1, 0.1, 3)
        assert np.abs(W1 - np.exp(0.7j) * W0).max() < 1e-14

    def test_rejects_bad_s(self):
        with pytest.raises(ValueError):
            spectral_flow_operator(1, 3, 0.0, 0.0, 0.1, 0.1, 0)
