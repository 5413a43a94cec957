import numpy as np
import pytest

from onnpolar.channel import (ChannelParams, awgn_transmit, channel_llr, demodulate,
                              ebn0_to_sigma2, make_rng, modulate)


class TestModulation:
    def test_examples(self):
        np.testing.assert_array_equal(modulate(np.zeros(4)), np.ones(4))
        np.testing.assert_array_equal(modulate([1]), [-1.0])

    def test_demap_round_trip(self):
        x = np.array([0, 1, 1, 0, 1], np.uint8)
        np.testing.assert_array_equal(demodulate(modulate(x)), x)
        np.testing.assert_array_equal((1 - modulate(x)) / 2, x)


class TestSnr:
    @pytest.mark.parametrize("eb, R, s2", [(0.0, 0.5, 1.0), (10.0, 0.5, 0.1), (0.0, 1.0, 0.5)])
    def test_examples(self, eb, R, s2):
        assert ebn0_to_sigma2(eb, R) == pytest.approx(s2, rel=1e-14)

    @pytest.mark.parametrize("R", [0.0, -0.5, 1.5])
    def test_bad_rate(self, R):
        with pytest.raises(ValueError):
            ebn0_to_sigma2(0.0, R)

    def test_params(self):
        assert ChannelParams(ebn0_db=10.0, rate=0.5).sigma2 == pytest.approx(0.1)


class TestAwgn:
    def test_noiseless(self):
        s = modulate([0, 1, 1])
        np.testing.assert_array_equal(awgn_transmit(s, 0.0, make_rng(1)), s)

    def test_moments(self):
        s = np.ones(10 ** 6)
        sigma2 = 0.7
        n = awgn_transmit(s, sigma2, make_rng(3)) - s
        assert abs(n.mean()) <= 4 * np.sqrt(sigma2) / 1000
        assert n.var() == pytest.approx(sigma2, rel=0.01)

    def test_same_seed_same_noise(self):
        s = np.zeros((3, 16))
        a = awgn_transmit(s, 1.0, make_rng(11, 2, 5))
        b = awgn_transmit(s, 1.0, make_rng(11, 2, 5))
        c = awgn_transmit(s, 1.0, make_rng(11, 2, 6))
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, c)

    def test_negative_variance(self):
        with pytest.raises(ValueError):
            awgn_transmit(np.ones(2), -1.0, make_rng(0))


class TestLlr:
    def test_examples(self):
        assert channel_llr(0.0, 1.0) == 0.0
        assert channel_llr(1.0, 1.0) == 2.0
        assert channel_llr(-0.5, 0.5) == -2.0

    def test_mean_matches_ga_init(self):
        sigma2 = 0.8
        y = awgn_transmit(np.ones(10 ** 6), sigma2, make_rng(4))
        assert channel_llr(y, sigma2).mean() == pytest.approx(2 / sigma2, rel=0.01)

    def test_bad_variance(self):
        with pytest.raises(ValueError):
            channel_llr(1.0, 0.0)
