"""Exact bitwise posteriors of the synthesized message channels.

The posterior of ``u_i`` given ``z_i = [y, u^{i-1}]`` is computed by
enumerating every message consistent with the prefix.  Messages are indexed
MSB-first, so fixing the first ``j`` message bits selects one contiguous
block of ``2**(K - j)`` codebook rows, and inside it bit ``j`` splits the
block into a 0-half and a 1-half.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import awgn_transmit, make_rng, modulate
from .polar import CodeConfig, embed_message, encode

MAX_ENUM_K = 20
GEN_CHUNK = 4096
_POST_CHUNK = 4096

PREFIX_MODES = ("literal", "bipolar")


@dataclass(frozen=True)
class Codebook:
    messages: np.ndarray  # (2^K, K) uint8
    words: np.ndarray  # (2^K, N) uint8, source words u
    symbols: np.ndarray  # (2^K, N) float, modulated codewords


@functools.lru_cache(maxsize=16)
def codebook(config: CodeConfig) -> Codebook:
    K = config.K
    if K > MAX_ENUM_K:
        raise ValueError(f"exact enumeration limited to K <= {MAX_ENUM_K}, got K={K}")
    idx = np.arange(1 << K, dtype=np.int64)
    shifts = np.arange(K - 1, -1, -1)
    messages = ((idx[:, None] >> shifts) & 1).astype(np.uint8)
    words = embed_message(messages, config)
    symbols = modulate(encode(words))
    for a in (messages, words, symbols):
        a.setflags(write=False)
    return Codebook(messages, words, symbols)


def _check_bit(i: int, config: CodeConfig) -> int:
    """Return the 0-based position of bit i inside the message vector."""
    try:
        return config.message_set.index(int(i))
    except ValueError:
        raise ValueError(f"bit {i} is not in the message set") from None


def _prefix_keys(prefixes: np.ndarray, i: int, config: CodeConfig) -> np.ndarray:
    """Validate prefixes against frozen positions and encode their message bits."""
    if prefixes.shape[1] != i - 1:
        raise ValueError(f"prefix length {prefixes.shape[1]} != i - 1 = {i - 1}")
    frozen = [f - 1 for f in config.frozen_set if f < i]
    if frozen and np.any(prefixes[:, frozen] != config.frozen_value):
        raise ValueError("prefix contradicts a frozen bit")
    mpos = [m - 1 for m in config.message_set if m < i]
    if not mpos:
        return np.zeros(prefixes.shape[0], dtype=np.int64)
    weights = 1 << np.arange(len(mpos) - 1, -1, -1, dtype=np.int64)
    return prefixes[:, mpos].astype(np.int64) @ weights


def posterior_batch(Y, prefixes, i: int, config: CodeConfig, sigma2: float):
    """Exact ``(r_star, llr)`` for a batch of observations.

    ``Y`` is (D, N); ``prefixes`` is (D, i - 1) with the bit values of
    ``u^{i-1}``.  ``r_star = 2 P(u_i = 1 | z) - 1`` and
    ``llr = log P(u_i = 0 | z) / P(u_i = 1 | z)`` are accumulated
    separately, both in the log domain with max subtraction.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    prefixes = np.asarray(prefixes).reshape(Y.shape[0], -1)
    if Y.shape[1] != config.N:
        raise ValueError(f"observation length {Y.shape[1]} != N={config.N}")
    j = _check_bit(i, config)
    keys = _prefix_keys(prefixes, i, config)
    cb = codebook(config)
    block = 1 << (config.K - j)
    half = block // 2
    offsets = np.arange(block)

    r_star = np.empty(Y.shape[0])
    llr = np.empty(Y.shape[0])
    for start in range(0, Y.shape[0], _POST_CHUNK):
        sl = slice(start, start + _POST_CHUNK)
        rows = keys[sl, None] * block + offsets
        # log-likelihood up to a per-sample constant: <y, s> / sigma2
        ll = np.einsum("dn,dbn->db", Y[sl], cb.symbols[rows]) / sigma2
        l0, l1 = ll[:, :half], ll[:, half:]
        top = ll.max(axis=1, keepdims=True)
        s0 = np.exp(l0 - top).sum(axis=1)
        s1 = np.exp(l1 - top).sum(axis=1)
        r_star[sl] = (s1 - s0) / (s1 + s0)
        llr[sl] = logsumexp(l0, axis=1) - logsumexp(l1, axis=1)
    return r_star, llr


def exact_posterior(y, prefix, i: int, config: CodeConfig, sigma2: float) -> float:
    """Soft target r*_i = 2 P(u_i = 1 | y, prefix) - 1 for one observation."""
    r, _ = posterior_batch(np.asarray(y, float)[None], np.asarray(prefix)[None], i, config, sigma2)
    return float(r[0])


def posterior_llr(y, prefix, i: int, config: CodeConfig, sigma2: float) -> float:
    """log P(u_i = 0 | z) / P(u_i = 1 | z); +-inf when one side has no mass."""
    _, L = posterior_batch(np.asarray(y, float)[None], np.asarray(prefix)[None], i, config, sigma2)
    return float(L[0])


def margin(r_star):
    r = np.abs(r_star)
    return r if np.ndim(r) else float(r)


def map_detect(r_star):
    """Bitwise MAP decision: 1 iff r* >= 0."""
    d = (np.asarray(r_star) >= 0).astype(np.uint8)
    return d if d.ndim else int(d)


def prefix_features(prefixes, mode: str = "literal") -> np.ndarray:
    """Numeric encoding of prefix bits: literal {0, 1} or bipolar {+1, -1}."""
    p = np.asarray(prefixes, dtype=float)
    if mode == "literal":
        return p
    if mode == "bipolar":
        return 1.0 - 2.0 * p
    raise ValueError(f"unknown prefix mode {mode!r}")


def bit_channel_inputs(Y, prefixes, mode: str = "literal") -> np.ndarray:
    """Stack ``z_i = [y, prefix]`` row-wise."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return np.hstack([Y, prefix_features(np.asarray(prefixes).reshape(Y.shape[0], -1), mode)])


@dataclass(frozen=True)
class BitChannelInput:
    y: np.ndarray
    prefix: np.ndarray
    bit_index: int
    representation_mode: str = "literal"

    def __post_init__(self):
        if len(self.prefix) != self.bit_index - 1:
            raise ValueError("prefix length must equal bit_index - 1")

    def vector(self) -> np.ndarray:
        return bit_channel_inputs(self.y[None], self.prefix[None], self.representation_mode)[0]


@dataclass(frozen=True)
class LabeledSample:
    input: BitChannelInput
    target: float
    true_bit: int


@dataclass
class Dataset:
    """Labeled samples of one bit-channel, stored column-wise.

    ``prefixes`` always holds the true source bits ``u^{i-1}``.
    """

    config: CodeConfig
    bit_index: int
    sigma2: float
    seed: int
    Y: np.ndarray = field(repr=False)
    prefixes: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    true_bits: np.ndarray = field(repr=False)
    mode: str = "literal"

    def __post_init__(self):
        D = self.Y.shape[0]
        if not (self.prefixes.shape == (D, self.bit_index - 1)
                and self.targets.shape == (D,) and self.true_bits.shape == (D,)):
            raise ValueError("dataset columns have inconsistent shapes")

    def __len__(self):
        return self.Y.shape[0]

    def __getitem__(self, k) -> LabeledSample:
        inp = BitChannelInput(self.Y[k], self.prefixes[k], self.bit_index, self.mode)
        return LabeledSample(inp, float(self.targets[k]), int(self.true_bits[k]))

    @property
    def dim(self) -> int:
        return self.config.N + self.bit_index - 1

    def inputs(self, mode: str | None = None) -> np.ndarray:
        return bit_channel_inputs(self.Y, self.prefixes, mode or self.mode)

    def split(self, k: int) -> tuple["Dataset", "Dataset"]:
        def part(s):
            return Dataset(self.config, self.bit_index, self.sigma2, self.seed, self.Y[s],
                           self.prefixes[s], self.targets[s], self.true_bits[s], self.mode)
        return part(slice(None, k)), part(slice(k, None))

    def save_csv(self, path) -> None:
        """Header line of metadata, then columns y1..yN, p1..p_{i-1}, target, true_bit."""
        N, i = self.config.N, self.bit_index
        with open(path, "w", newline="") as fh:
            fh.write(f"# N={N} K={self.config.K} i={i} sigma2={self.sigma2!r} seed={self.seed} "
                     f"D={len(self)} message_set={','.join(map(str, self.config.message_set))} "
                     f"frozen_value={self.config.frozen_value}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"y{k}" for k in range(1, N + 1)] + [f"p{k}" for k in range(1, i)]
                       + ["target", "true_bit"])
            for k in range(len(self)):
                w.writerow([repr(float(v)) for v in self.Y[k]]
                           + [int(b) for b in self.prefixes[k]]
                           + [repr(float(self.targets[k])), int(self.true_bits[k])])

    @classmethod
    def load_csv(cls, path, mode: str = "literal") -> "Dataset":
        with open(path, newline="") as fh:
            meta = dict(tok.split("=", 1) for tok in fh.readline()[1:].split())
            rows = list(csv.reader(fh))[1:]
        N, K, i = int(meta["N"]), int(meta["K"]), int(meta["i"])
        ms = tuple(int(v) for v in meta["message_set"].split(",")) if K else ()
        config = CodeConfig(n=N.bit_length() - 1, K=K, message_set=ms,
                            frozen_value=int(meta["frozen_value"]))
        arr = np.array(rows, dtype=float).reshape(len(rows), N + i + 1)
        return cls(config, i, float(meta["sigma2"]), int(meta["seed"]), arr[:, :N],
                   arr[:, N:N + i - 1].astype(np.uint8), arr[:, -2], arr[:, -1].astype(np.uint8), mode)


def sample_transmissions(config: CodeConfig, sigma2: float, count: int, rng: np.random.Generator):
    """Uniform messages through encoder, BPSK and AWGN: returns (U, Y)."""
    m = rng.integers(0, 2, size=(count, config.K), dtype=np.uint8)
    U = embed_message(m, config)
    Y = awgn_transmit(modulate(encode(U)), sigma2, rng)
    return U, Y


def generate_dataset(config: CodeConfig, sigma2: float, D: int, i: int, seed: int,
                     stream: int = 0, mode: str = "literal") -> Dataset:
    """D labeled samples of bit-channel i with true prefixes and exact soft targets.

    Samples are produced in fixed chunks, each from its own stream
    ``(seed, i, stream, chunk)``.
    """
    _check_bit(i, config)
    if D < 1:
        raise ValueError("D must be >= 1")
    if mode not in PREFIX_MODES:
        raise ValueError(f"unknown prefix mode {mode!r}")
    Us, Ys = [], []
    for c, start in enumerate(range(0, D, GEN_CHUNK)):
        U, Y = sample_transmissions(config, sigma2, min(GEN_CHUNK, D - start),
                                    make_rng(seed, i, stream, c))
        Us.append(U)
        Ys.append(Y)
    U, Y = np.vstack(Us), np.vstack(Ys)
    prefixes = U[:, : i - 1]
    targets, _ = posterior_batch(Y, prefixes, i, config, sigma2)
    return Dataset(config, i, float(sigma2), int(seed), Y, prefixes, targets,
                   U[:, i - 1].copy(), mode)


def empirical_low_margin(dataset: Dataset, rho: float) -> float:
    """Fraction of samples whose posterior margin |t| is at most rho."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return float(np.mean(np.abs(dataset.targets) <= rho))
