import numpy as np
import pytest

from risnull import (
    ChannelSet,
    Perturbation,
    RisVector,
    apply_perturbation,
    complex_normal,
    effective_matrix,
    gen_channels,
    gen_perturbation,
    received_signal,
    signal_level,
)


class TestGenChannels:
    def test_generation_invariants(self):
        ch = gen_channels(1, 8, seed=42)
        assert np.linalg.norm(ch.b) <= 1 + 1e-12
        assert np.allclose(np.linalg.norm(ch.A, axis=0), 1.0, atol=1e-12)
        assert ch.m == 1 and ch.n == 8
        assert np.linalg.norm(ch.c) <= 1 + 1e-12

    def test_deterministic(self):
        a = gen_channels(3, 5, seed=123)
        b = gen_channels(3, 5, seed=123)
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.b, b.b)
        assert np.array_equal(a.c, b.c)

    def test_different_seeds_differ(self):
        a = gen_channels(3, 5, seed=1)
        b = gen_channels(3, 5, seed=2)
        assert not np.allclose(a.A, b.A)

    def test_raw_draw_statistics(self):
        # |z| for unit-variance circular normal is Rayleigh(1/sqrt(2)),
        # mean sqrt(pi)/2; checked on the raw generator the channels use
        rng = np.random.default_rng(7)
        draws = complex_normal(rng, 10_000)
        expected = np.sqrt(np.pi) / 2
        assert np.abs(np.abs(draws).mean() - expected) < 0.02 * expected

    @pytest.mark.parametrize("m,n", [(0, 4), (4, 0), (-1, 2)])
    def test_invalid_dimensions(self, m, n):
        with pytest.raises(ValueError):
            gen_channels(m, n, seed=0)


class TestGenPerturbation:
    def test_zero_sigma(self):
        p = gen_perturbation(4, 8, 0.0, seed=5)
        assert not p.dA.any() and not p.db.any() and not p.dc.any()

    def test_component_norms_exact(self):
        p = gen_perturbation(4, 8, 0.1, seed=5)
        assert abs(np.linalg.norm(p.dA) - 0.1) < 1e-12
        assert abs(np.linalg.norm(p.db) - 0.1) < 1e-12
        assert abs(np.linalg.norm(p.dc) - 0.1) < 1e-12

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            gen_perturbation(2, 2, -0.1, seed=0)

    def test_distinct_seeds_are_independent_directions(self):
        sp = 0.05
        for k in range(100):
            p1 = gen_perturbation(4, 8, sp, seed=2 * k)
            p2 = gen_perturbation(4, 8, sp, seed=2 * k + 1)
            inner = abs(np.vdot(p1.dA.ravel(), p2.dA.ravel()))
            assert inner < 0.99 * sp**2

    def test_determinism(self):
        p1 = gen_perturbation(3, 3, 0.2, seed=11)
        p2 = gen_perturbation(3, 3, 0.2, seed=11)
        assert np.array_equal(p1.dA, p2.dA)


class TestApplyPerturbation:
    def test_zero_perturbation_is_identity(self):
        ch = gen_channels(3, 4, seed=0)
        out = apply_perturbation(ch, Perturbation.zero(3, 4))
        assert np.array_equal(out.A, ch.A)
        assert np.array_equal(out.b, ch.b)
        assert np.array_equal(out.c, ch.c)

    def test_direct_addition(self):
        ch = ChannelSet(np.zeros((2, 2)), [1.0, 0.0], [0.0, 0.0])
        p = Perturbation(np.zeros((2, 2)), [0.1, 0.0], [0.0, 0.0], 0.1)
        assert np.allclose(apply_perturbation(ch, p).b, [1.1, 0.0])

    def test_round_trip_with_negation(self):
        ch = gen_channels(4, 6, seed=3)
        p = gen_perturbation(4, 6, 0.3, seed=4)
        back = apply_perturbation(apply_perturbation(ch, p), p.negate())
        assert np.allclose(back.A, ch.A, atol=1e-15)
        assert np.allclose(back.b, ch.b, atol=1e-15)
        assert np.allclose(back.c, ch.c, atol=1e-15)

    def test_shape_mismatch(self):
        ch = gen_channels(2, 3, seed=0)
        with pytest.raises(ValueError):
            apply_perturbation(ch, Perturbation.zero(3, 2))

    def test_no_renormalisation(self):
        ch = gen_channels(2, 3, seed=1)
        p = gen_perturbation(2, 3, 0.5, seed=2)
        out = apply_perturbation(ch, p)
        assert not np.allclose(np.linalg.norm(out.A, axis=0), 1.0)


class TestEffectiveMatrix:
    def test_all_ones_is_identity_scaling(self):
        A = complex_normal(np.random.default_rng(0), (3, 4))
        assert np.array_equal(effective_matrix(A, np.ones(4)), A)

    def test_diagonal_example(self):
        out = effective_matrix(np.eye(2), np.array([2j, 3.0]))
        assert np.allclose(out, np.diag([2j, 3.0]))

    def test_matches_hadamard_evaluation_order(self):
        rng = np.random.default_rng(6)
        A = complex_normal(rng, (3, 4))
        c = complex_normal(rng, 4)
        A_eff = effective_matrix(A, c)
        for _ in range(20):
            d = complex_normal(rng, 4)
            assert np.allclose(A_eff @ d, A @ (c * d), atol=1e-14)

    def test_linear_in_c(self):
        rng = np.random.default_rng(8)
        A = complex_normal(rng, (3, 5))
        c1, c2 = complex_normal(rng, 5), complex_normal(rng, 5)
        assert np.allclose(
            effective_matrix(A, c1 + c2),
            effective_matrix(A, c1) + effective_matrix(A, c2),
            atol=1e-15,
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            effective_matrix(np.eye(2), np.ones(3))


class TestSignalLevel:
    def test_zero_reflector(self):
        ch = gen_channels(3, 4, seed=9)
        assert signal_level(ch, np.zeros(4)) == pytest.approx(
            float(np.linalg.norm(ch.b) ** 2))

    def test_exact_nulling_square(self):
        ch = gen_channels(4, 4, seed=10)
        A_eff = ch.effective()
        d = -np.linalg.solve(A_eff, ch.b)
        assert signal_level(ch, d) <= 1e-20 * np.linalg.norm(ch.b) ** 2

    def test_matches_normal_equations_residual(self):
        # overdetermined instance: independent residual derivation from the
        # normal equations of the projection
        ch = gen_channels(4, 2, seed=11)
        A_eff = ch.effective()
        G = A_eff.conj().T @ A_eff
        d = -np.linalg.solve(G, A_eff.conj().T @ ch.b)
        proj = A_eff @ np.linalg.solve(G, A_eff.conj().T @ ch.b)
        expected = float(np.linalg.norm(ch.b - proj) ** 2)
        assert abs(signal_level(ch, d) - expected) < 1e-12

    def test_underdetermined_null_matches_oracle(self):
        ch = gen_channels(2, 4, seed=12)
        A_eff = ch.effective()
        d = -np.linalg.pinv(A_eff) @ ch.b
        # full row rank: the projector onto range(A_eff) is the identity
        assert signal_level(ch, d) < 1e-25

    def test_nonnegative(self):
        rng = np.random.default_rng(13)
        for k in range(20):
            ch = gen_channels(3, 3, seed=100 + k)
            d = complex_normal(rng, 3)
            assert signal_level(ch, d) >= 0.0

    def test_accepts_ris_vector(self):
        ch = gen_channels(2, 2, seed=14)
        assert signal_level(ch, RisVector(np.zeros(2))) == signal_level(ch, np.zeros(2))

    def test_shape_mismatch(self):
        ch = gen_channels(2, 3, seed=0)
        with pytest.raises(ValueError):
            signal_level(ch, np.zeros(4))


class TestReceivedSignal:
    def test_pass_through(self):
        ch = gen_channels(3, 4, seed=15)
        y = received_signal(ch, np.zeros(4), 1.0, np.zeros(3))
        assert np.allclose(y, ch.b)

    def test_nulled_direct_path_leaves_noise(self):
        ch = gen_channels(2, 4, seed=16)
        d = -np.linalg.pinv(ch.effective()) @ ch.b
        noise = complex_normal(np.random.default_rng(1), 2) * 0.1
        y = received_signal(ch, d, 1.0, noise)
        assert np.allclose(y, noise, atol=1e-12)

    def test_noise_power_monte_carlo(self):
        # with a nulling solution the received power is all noise: m * sigma2
        ch = gen_channels(2, 4, seed=17)
        d = -np.linalg.pinv(ch.effective()) @ ch.b
        sigma2 = 0.01
        rng = np.random.default_rng(18)
        powers = []
        for _ in range(10_000):
            w = complex_normal(rng, 2) * np.sqrt(sigma2)
            y = received_signal(ch, d, 1.0, w)
            powers.append(np.linalg.norm(y) ** 2)
        expected = ch.m * sigma2
        assert abs(np.mean(powers) - expected) < 0.05 * expected


class TestDomainTypes:
    def test_channelset_dimension_check(self):
        with pytest.raises(ValueError):
            ChannelSet(np.zeros((2, 3)), np.zeros(3), np.zeros(3))

    def test_perturbation_dimension_check(self):
        with pytest.raises(ValueError):
            Perturbation(np.zeros((2, 3)), np.zeros(2), np.zeros(2))

    def test_passive_ris_vector_rejects_large_entries(self):
        with pytest.raises(ValueError):
            RisVector(np.array([1.5 + 0j]), mode="passive")
        RisVector(np.array([1.0 + 0j]), mode="passive")  # boundary is fine

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            RisVector(np.zeros(2), mode="semi")
