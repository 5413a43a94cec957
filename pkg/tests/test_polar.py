import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onnpolar.errors import NumericFailure
from onnpolar.polar import (
    PHI_SUP, CodeConfig, ReliabilityProfile, construct_code, embed_message, encode,
    ga_bit_error, ga_construct, ga_phi, ga_phi_inv, kronecker_generator, q_function,
    select_message_set, write_construction_csv,
)

from oracles import encode_matrix, encode_recursive, generator_by_subset_rule, phi_inv_left, phi_scalar


class TestCodeConfig:
    def test_valid(self):
        c = CodeConfig(n=2, K=2, message_set=(3, 4))
        assert c.N == 4 and c.rate == 0.5 and c.frozen_set == (1, 2)
        np.testing.assert_array_equal(c.message_mask(), [False, False, True, True])

    @pytest.mark.parametrize("kw", [
        dict(n=0, K=0, message_set=()),
        dict(n=2, K=2, message_set=(3,)),
        dict(n=2, K=2, message_set=(3, 3)),
        dict(n=2, K=2, message_set=(0, 4)),
        dict(n=2, K=2, message_set=(4, 5)),
        dict(n=2, K=2, message_set=(4, 3)),
        dict(n=2, K=5, message_set=(1, 2, 3, 4, 4)),
        dict(n=2, K=1, message_set=(1,), frozen_value=2),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CodeConfig(**kw)


class TestKronecker:
    def test_n1(self):
        np.testing.assert_array_equal(kronecker_generator(1), [[1, 0], [1, 1]])

    def test_n2(self):
        expected = [[1, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]]
        np.testing.assert_array_equal(kronecker_generator(2), expected)

    @pytest.mark.parametrize("n", range(1, 7))
    def test_matches_subset_rule(self, n):
        G = kronecker_generator(n)
        np.testing.assert_array_equal(G, generator_by_subset_rule(n))
        np.testing.assert_array_equal(G[0], np.eye(1 << n, dtype=np.uint8)[0])

    def test_invalid(self):
        with pytest.raises(ValueError):
            kronecker_generator(0)


class TestEmbed:
    def test_examples(self):
        np.testing.assert_array_equal(
            embed_message([0, 0], CodeConfig(2, 2, (3, 4))), [0, 0, 0, 0])
        np.testing.assert_array_equal(
            embed_message([1, 0], CodeConfig(2, 2, (3, 4))), [0, 0, 1, 0])
        np.testing.assert_array_equal(
            embed_message([1, 1], CodeConfig(2, 2, (2, 4))), [0, 1, 0, 1])

    def test_frozen_value_one(self):
        np.testing.assert_array_equal(
            embed_message([0], CodeConfig(2, 1, (4,), frozen_value=1)), [1, 1, 1, 0])

    def test_batch(self):
        c = CodeConfig(2, 2, (2, 4))
        u = embed_message(np.array([[1, 0], [0, 1]]), c)
        np.testing.assert_array_equal(u, [[0, 1, 0, 0], [0, 0, 0, 1]])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            embed_message([1, 0, 1], CodeConfig(2, 2, (3, 4)))


class TestEncode:
    def test_examples(self):
        np.testing.assert_array_equal(encode(np.zeros(8, np.uint8)), np.zeros(8))
        np.testing.assert_array_equal(encode([0, 1]), [1, 1])
        np.testing.assert_array_equal(encode([0, 0, 0, 1]), [1, 1, 1, 1])

    @pytest.mark.parametrize("N", [2, 4, 8])
    def test_exhaustive_against_both_oracles(self, N):
        U = np.array(list(itertools.product((0, 1), repeat=N)), dtype=np.uint8)
        X = encode(U)
        for u, x in zip(U, X):
            np.testing.assert_array_equal(x, encode_matrix(u))
            np.testing.assert_array_equal(x, encode_recursive(u))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 8), st.data())
    def test_linear_over_gf2(self, n, data):
        N = 1 << n
        u = np.array(data.draw(st.lists(st.integers(0, 1), min_size=N, max_size=N)), np.uint8)
        v = np.array(data.draw(st.lists(st.integers(0, 1), min_size=N, max_size=N)), np.uint8)
        np.testing.assert_array_equal(encode(u ^ v), encode(u) ^ encode(v))

    def test_involution(self):
        # F^{(x)n} is its own inverse over GF(2)
        rng = np.random.default_rng(0)
        U = rng.integers(0, 2, size=(50, 32), dtype=np.uint8)
        np.testing.assert_array_equal(encode(encode(U)), U)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            encode([0, 1, 0, 1], CodeConfig(3, 1, (8,)))
        with pytest.raises(ValueError):
            encode([0, 1, 0])

    def test_input_not_mutated(self):
        u = np.array([0, 1, 1, 0], np.uint8)
        encode(u)
        np.testing.assert_array_equal(u, [0, 1, 1, 0])


class TestPhi:
    def test_examples(self):
        assert ga_phi(0.0) == 1.0
        assert ga_phi(1.0) == pytest.approx(math.exp(-0.4309), rel=1e-12)
        assert ga_phi(1.0) == pytest.approx(0.64994, abs=2e-5)
        assert ga_phi(10.0) == pytest.approx(math.sqrt(math.pi / 10) * (6 / 7) * math.exp(-2.5), rel=1e-14)
        assert ga_phi(10.0) == pytest.approx(0.03944, abs=1e-5)

    def test_matches_scalar_oracle(self):
        xs = np.concatenate([[0.0], np.geomspace(1e-6, 200, 400), [9.999999, 10.0, 10.000001]])
        np.testing.assert_allclose(ga_phi(xs), [phi_scalar(x) for x in xs], rtol=1e-14)

    def test_negative(self):
        with pytest.raises(ValueError):
            ga_phi(-1e-9)

    def test_decreasing_on_each_branch(self):
        left = np.linspace(0.03, 9.999, 5000)
        right = np.linspace(10.0, 50.0, 5000)
        assert np.all(np.diff(ga_phi(left)) < 0)
        assert np.all(np.diff(ga_phi(right)) < 0)

    def test_branch_mismatch_at_switch(self):
        gap = ga_phi(10.0) - phi_scalar(10.0 - 1e-12)
        assert abs(gap) / ga_phi(10.0) <= 0.05

    def test_excursion_above_one_near_zero(self):
        # published constants put phi(0+) at exp(0.0218); kept verbatim
        assert ga_phi(1e-6) > 1.0
        assert ga_phi(1e-6) <= PHI_SUP


class TestPhiInverse:
    def test_examples(self):
        assert ga_phi_inv(1.0) == 0.0
        assert ga_phi_inv(ga_phi(5.0)) == pytest.approx(5.0, abs=1e-8)
        x = ga_phi_inv(0.03945)
        assert abs(x - 10.0) < 0.1
        assert abs(ga_phi(x) - 0.03945) <= 1e-10

    def test_left_branch_against_brent(self):
        ys = np.linspace(0.04, 0.999, 200)
        np.testing.assert_allclose(ga_phi_inv(ys), [phi_inv_left(y) for y in ys], atol=1e-9)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(min_value=1e-300, max_value=1.0, allow_subnormal=False))
    def test_residual(self, y):
        x = ga_phi_inv(y)
        assert x >= 0
        assert abs(ga_phi(x) - y) <= 1e-10 * max(1.0, y) or y < 1e-200

    def test_round_trip_away_from_overlap(self):
        xs = np.concatenate([np.geomspace(1e-4, 9.9, 2000), np.linspace(10.09, 50, 2000)])
        np.testing.assert_allclose(ga_phi_inv(ga_phi(xs)), xs, atol=1e-8)

    def test_round_trip_fails_only_in_overlap(self):
        # the jump at x = 10 makes phi two-to-one on a short interval; there
        # the left-branch preimage is returned
        xs = np.linspace(1e-4, 50, 200001)
        bad = xs[np.abs(ga_phi_inv(ga_phi(xs)) - xs) > 1e-8]
        assert bad.size > 0
        assert bad.min() >= 10.0 and bad.max() <= 10.09

    @pytest.mark.parametrize("y", [0.0, -0.1, PHI_SUP * 1.0001, float("nan")])
    def test_domain(self, y):
        with pytest.raises(ValueError):
            ga_phi_inv(y)

    def test_large_bracket(self):
        x = ga_phi_inv(ga_phi(900.0))
        assert x == pytest.approx(900.0, rel=1e-9)


class TestConstruction:
    def test_n1_examples(self):
        mu = ga_construct(1, 1.0).mu
        assert mu[1] == 4.0
        p = phi_scalar(2.0)
        assert mu[0] == pytest.approx(phi_inv_left(1 - (1 - p) ** 2), abs=1e-9)
        assert mu[0] == pytest.approx(0.8233642323291132, abs=1e-9)

    def test_doubling_exact(self):
        prev = ga_construct(3, 1.0).mu
        cur = ga_construct(4, 1.0).mu
        np.testing.assert_array_equal(cur[1::2], 2.0 * prev)

    def test_noise_limit(self):
        assert np.all(ga_construct(4, 1e8).mu < 1e-6)

    def test_check_node_never_gains(self):
        mu = ga_construct(1, 1e3).mu
        assert mu[0] == 0.0 and mu[1] == pytest.approx(4e-3)

    def test_16_8_at_0db(self):
        c, prof = construct_code(4, 8, 1.0)
        assert c.message_set == (8, 10, 11, 12, 13, 14, 15, 16)
        assert prof.N == 16
        # last channel is the strongest: 2 * 2^n / sigma2
        assert prof.mu[-1] == 32.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            ga_construct(0, 1.0)
        with pytest.raises(ValueError):
            ga_construct(2, 0.0)

    def test_tiny_noise_underflow(self):
        with pytest.raises(NumericFailure):
            ga_construct(6, 1e-5)

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            ReliabilityProfile(1.0, np.array([1.0, -0.1]))
        prof = ReliabilityProfile(1.0, np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            prof.mu[0] = 3.0


class TestSelect:
    def test_examples(self):
        assert select_message_set(np.array([0.1, 4.0]), 1) == (2,)
        assert select_message_set(np.array([3.0, 3.0]), 1) == (1,)
        mu = np.arange(8.0)
        assert select_message_set(mu, 8) == tuple(range(1, 9))

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            select_message_set(np.ones(4), 5)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 100), min_size=2, max_size=32), st.floats(1e-3, 1e3), st.data())
    def test_scale_invariance(self, mu, c, data):
        mu = np.array(mu)
        K = data.draw(st.integers(0, len(mu)))
        scaled = mu * c
        # skip draws where scaling merges or splits ties in floating point
        if np.unique(mu).size != np.unique(scaled).size:
            return
        assert select_message_set(mu, K) == select_message_set(scaled, K)


class TestBitError:
    def test_examples(self):
        assert ga_bit_error(0.0) == 0.5
        assert ga_bit_error(2.0) == pytest.approx(0.15865525393145707, rel=1e-12)
        assert ga_bit_error(1e4) < 1e-300

    def test_q(self):
        assert q_function(0.0) == 0.5
        assert q_function(8.0) == pytest.approx(6.22096057427178e-16, rel=1e-12)

    def test_negative(self):
        with pytest.raises(ValueError):
            ga_bit_error(-1.0)


class TestConstructionCsv:
    def test_rows_and_determinism(self, tmp_path):
        c, prof = construct_code(4, 8, 1.0)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_construction_csv(a, prof, c)
        write_construction_csv(b, prof, c)
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        assert lines[0] == "index,mu,ga_bit_error,is_message"
        assert len(lines) == 17
        assert sum(int(l.split(",")[-1]) for l in lines[1:]) == 8

    def test_full_rate(self, tmp_path):
        c, prof = construct_code(3, 8, 1.0)
        write_construction_csv(tmp_path / "f.csv", prof, c)
        rows = (tmp_path / "f.csv").read_text().splitlines()[1:]
        assert all(r.endswith(",1") for r in rows)
