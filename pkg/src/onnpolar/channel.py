"""BPSK over AWGN, channel LLRs, SNR bookkeeping and seeded random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox stream for ``(seed, *key)``.

    Distinct keys under one master seed give statistically independent
    streams, so tasks can be farmed out in any order and still reproduce.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    rate: float

    @property
    def sigma2(self) -> float:
        return ebn0_to_sigma2(self.ebn0_db, self.rate)


def modulate(x) -> np.ndarray:
    """BPSK map 0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(x, dtype=float)


def demodulate(s) -> np.ndarray:
    return ((1.0 - np.asarray(s, dtype=float)) / 2.0).astype(np.uint8)


def ebn0_to_sigma2(ebn0_db: float, rate: float) -> float:
    """Noise variance per real dimension for unit-energy BPSK at code rate ``rate``."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    return 1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))


def awgn_transmit(s, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """y = s + n with n ~ N(0, sigma2) i.i.d."""
    if not sigma2 >= 0:
        raise ValueError("sigma2 must be nonnegative")
    s = np.asarray(s, dtype=float)
    return s + np.sqrt(sigma2) * rng.standard_normal(s.shape)


def channel_llr(y, sigma2: float):
    """Per-use channel LLR 2y / sigma2."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return 2.0 * np.asarray(y, dtype=float) / sigma2
